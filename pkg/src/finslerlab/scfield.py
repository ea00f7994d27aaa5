"""Semi-concurrent vector fields: null-space detection and condition checks.

A field B(x) is semi-concurrent when B^h C_hij = 0 for every supporting
element y.  Detection stacks the linear maps B -> B^h C_hij(x, y_s) over many
y-samples and extracts the numerical null space by SVD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .connections import ExprField, h_cov_deriv
from .dsl import Bindings, MetricSpec, parse_expr
from .errors import FinslerLabError, IncompatibleKind
from .expr import Expr, param_names, substitute, to_source, variables, xvar
from .sampling import sample_directions, sample_points
from .symdiff import differentiate
from .tape import compile_tape
from .tensors import fundamental_bundle, point_values, require_nondegenerate

__all__ = [
    "VectorFieldSpec", "NullSpace", "SCFieldReport", "ConditionReport",
    "sc_nullspace_at", "sc_detect", "check_condition", "independence_invariants",
    "principal_angles", "gradient_diagnostic", "KINDS", "CONDITIONS",
]

KINDS = ("generic", "gradient", "conformal", "concurrent")
CONDITIONS = ("SC", "C", "F", "CC")


@dataclass(frozen=True)
class VectorFieldSpec:
    """Components B^i(x) (x-variables and parameters only).

    ``potential`` is the scalar f (F-condition) or sigma (CC-condition) whose
    x-gradient supplies the covector f_i or sigma_h.  ``params`` binds field
    parameters such as the free scale ``f`` of a detected SC direction.
    """

    components: tuple
    kind: str = "generic"
    potential: Expr | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}; expected one of {KINDS}")
        exprs = list(self.components) + ([self.potential] if self.potential is not None else [])
        for e in exprs:
            if any(kind == "y" for kind, _ in variables(e)):
                raise ValueError(f"field component depends on y: {to_source(e)}")

    def __hash__(self):
        return hash((self.components, self.kind, self.potential, tuple(self.params.items())))

    @property
    def dim(self) -> int:
        return len(self.components)

    @classmethod
    def parse(cls, text: str, dim: int, kind: str = "generic", potential: str | None = None,
              params: Mapping[str, float] | None = None, label: str = "") -> "VectorFieldSpec":
        """From ``"B1;B2;...;Bn"``; identifiers other than x1..xn are parameters."""
        parts = [t.strip() for t in text.split(";")] if text else []
        if potential is not None and not parts:
            pot = parse_expr(potential, dim, free=True)
            return cls.from_potential(pot, dim, kind, params, label)
        if len(parts) != dim:
            raise FinslerLabError(f"field has {len(parts)} components, metric dim is {dim}")
        comps = tuple(parse_expr(t, dim, free=True) for t in parts)
        pot = parse_expr(potential, dim, free=True) if potential is not None else None
        return cls(comps, kind, pot, params or {}, label)

    @classmethod
    def from_potential(cls, potential: Expr, dim: int, kind: str = "gradient",
                       params: Mapping[str, float] | None = None, label: str = ""):
        comps = tuple(differentiate(potential, xvar(i)) for i in range(dim))
        return cls(comps, kind, potential, params or {}, label)

    def _bind(self, spec: MetricSpec) -> dict:
        bound = {**spec.params, **self.params}
        missing = set().union(*(param_names(e) for e in self._exprs())) - set(bound)
        if missing:
            raise FinslerLabError(f"unbound field parameter(s): {', '.join(sorted(missing))}")
        return bound

    def _exprs(self):
        return list(self.components) + ([self.potential] if self.potential is not None else [])

    def values(self, spec: MetricSpec, x) -> np.ndarray:
        tape = compile_tape(self.components)
        return np.array(tape(x, np.zeros(len(x)), self._bind(spec)))

    def potential_gradient(self, spec: MetricSpec, x) -> np.ndarray:
        if self.potential is None:
            raise IncompatibleKind("condition needs a potential (f or sigma)")
        grads = tuple(differentiate(self.potential, xvar(i)) for i in range(spec.dim))
        return np.array(compile_tape(grads)(x, np.zeros(len(x)), self._bind(spec)))

    def as_field(self, spec: MetricSpec) -> ExprField:
        return ExprField(list(self.components), "u", self._bind(spec))

    def to_dict(self):
        out = {"components": [to_source(e) for e in self.components], "kind": self.kind,
               "params": dict(self.params)}
        if self.potential is not None:
            out["potential"] = to_source(self.potential)
        if self.label:
            out["label"] = self.label
        return out


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (ascending) between the column spans of A and B."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros(0)
    qa, _ = np.linalg.qr(A)
    qb, _ = np.linalg.qr(B)
    k = min(qa.shape[1], qb.shape[1])
    cos = np.sort(np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), -1.0, 1.0))[::-1][:k]
    # arccos is inaccurate near 0; take small angles from the sines instead
    rest = qb - qa @ (qa.T @ qb) if qa.shape[1] >= qb.shape[1] else qa - qb @ (qb.T @ qa)
    sin = np.sort(np.clip(np.linalg.svd(rest, compute_uv=False), 0.0, 1.0))[:k]
    ang = np.arccos(cos)
    small = cos ** 2 > 0.5
    ang[small] = np.arcsin(sin[small])
    return np.sort(ang)


def _min_samples(n: int) -> int:
    return n * (n + 1) // 2


@dataclass
class NullSpace:
    basis: np.ndarray          # columns are orthonormal
    singular_values: np.ndarray
    c_zero: bool
    n_samples: int
    soundness: float           # max over samples of max|v C_s| / max|C_s|

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def to_dict(self):
        return {"basis": self.basis.T.tolist(), "dim": self.dim,
                "singular_values": self.singular_values.tolist(),
                "c_zero_at_samples": self.c_zero, "n_samples": self.n_samples,
                "soundness_residual": self.soundness}


def sc_nullspace_at(spec: MetricSpec, x, y_samples: Sequence, tol: float = 1e-8) -> NullSpace:
    """Orthonormal basis of {B : B^h C_hij(x, y_s) = 0 for every sample s}.

    Unusable samples (outside the domain or with degenerate g) are skipped;
    at least n(n+1)/2 must remain.
    """
    n = spec.dim
    x = tuple(float(v) for v in x)
    blocks, raw = [], []
    c_zero = True
    for y in y_samples:
        try:
            fb = fundamental_bundle(spec, Bindings(x, y))
        except FinslerLabError:
            continue
        if not fb.nondegenerate:
            continue
        C = fb.C.data
        cmax = float(np.max(np.abs(C)))
        scale = max(1.0, float(np.max(np.abs(fb.g.data))))
        raw.append(C)
        if cmax > tol * scale:
            c_zero = False
            # row (i, j), column h
            M = np.moveaxis(C, 0, -1).reshape(n * n, n)
            blocks.append(M / np.linalg.norm(M))
    used = len(raw)
    if used < _min_samples(n):
        raise FinslerLabError(f"too few usable y-samples at x={list(x)}: {used} < {_min_samples(n)}")
    if c_zero:
        return NullSpace(np.eye(n), np.zeros(n), True, used, 0.0)
    M = np.vstack(blocks)
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    sv = np.zeros(n)
    sv[:len(s)] = s
    keep = sv <= tol * sv[0]
    basis = vt[keep].T
    sound = 0.0
    for C in raw:
        cmax = float(np.max(np.abs(C)))
        if basis.shape[1] and cmax > 0:
            sound = max(sound, float(np.max(np.abs(np.einsum("hij,hd->ijd", C, basis)))) / cmax)
    return NullSpace(basis, sv, False, used, sound)


@dataclass
class ConditionReport:
    kind: str
    residuals: list
    thresholds: list
    max_residual: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "residuals": self.residuals, "thresholds": self.thresholds,
                "max_residual": self.max_residual, "passed": self.passed, "details": self.details}


def _as_samples(spec, samples, seed=0):
    if isinstance(samples, int):
        return sample_points(spec, samples, seed)
    return [s if isinstance(s, Bindings) else Bindings(*s) for s in samples]


def check_condition(spec: MetricSpec, fld: VectorFieldSpec, kind: str, samples=20,
                    tol: float = 1e-7, seed: int = 0) -> ConditionReport:
    """Residual of the SC, C, F or CC condition at each sample.

    SC: max|B^h C_hij|.  C: the larger of that and max|B^i_{|j} + delta^i_j|.
    F: max|f_i dot-d_k g^{ij}| with dot-d_k g^{ij} = -2 g^{ia} g^{jb} C_abk.
    CC: max|sigma_h C^h_ij|.  A sample passes when its residual is at most
    tol * max(1, max|g|) * max(1, max|B|).
    """
    kind = kind.upper()
    if kind not in CONDITIONS:
        raise IncompatibleKind(f"unknown condition {kind!r}; expected one of {CONDITIONS}")
    if fld.dim != spec.dim:
        raise IncompatibleKind(f"field dimension {fld.dim} does not match metric dim {spec.dim}")
    if kind in ("F", "CC") and fld.potential is None:
        raise IncompatibleKind(f"condition {kind} needs a field with a potential")
    pts = _as_samples(spec, samples, seed)
    residuals, thresholds, extra = [], [], []
    eye = np.eye(spec.dim)
    for p in pts:
        fb = fundamental_bundle(spec, p)
        require_nondegenerate(fb)
        C = fb.C.data
        B = fld.values(spec, p.x)
        scale = max(1.0, float(np.max(np.abs(fb.g.data)))) * max(1.0, float(np.max(np.abs(B))))
        if kind in ("SC", "C"):
            r = float(np.max(np.abs(np.einsum("h,hij->ij", B, C))))
            if kind == "C":
                D = h_cov_deriv(spec, fld.as_field(spec), p).data
                rc = float(np.max(np.abs(D + eye)))
                extra.append({"sc": r, "hcov": rc})
                r = max(r, rc)
        elif kind == "F":
            fi = fld.potential_gradient(spec, p.x)
            gi = fb.g_inv.data
            dginv = -2.0 * np.einsum("ia,jb,abk->ijk", gi, gi, C)
            r = float(np.max(np.abs(np.einsum("i,ijk->jk", fi, dginv))))
        else:
            sh = fld.potential_gradient(spec, p.x)
            r = float(np.max(np.abs(np.einsum("h,hij->ij", sh, fb.C_mixed.data))))
        residuals.append(r)
        thresholds.append(tol * scale)
    passed = all(r <= t for r, t in zip(residuals, thresholds))
    details = {"n_samples": len(pts), "tol": tol}
    if extra:
        details["sc_max"] = max(e["sc"] for e in extra)
        details["hcov_max"] = max(e["hcov"] for e in extra)
    return ConditionReport(kind, residuals, thresholds, max(residuals) if residuals else 0.0,
                           passed, details)


def raised_gradient(spec: MetricSpec, fld: VectorFieldSpec, p: Bindings) -> np.ndarray:
    """b^j = f_i g^{ij}; y-independent exactly when the F-condition holds."""
    fb = fundamental_bundle(spec, p)
    require_nondegenerate(fb)
    return fld.potential_gradient(spec, p.x) @ fb.g_inv.data


def independence_invariants(spec: MetricSpec, fld: VectorFieldSpec, samples=20,
                            tol: float = 1e-8, seed: int = 0) -> dict:
    """B0 = B_i y^i, B^2 F^2 - B0^2 and det(B^i_{|j}) per sample, with flags."""
    pts = _as_samples(spec, samples, seed)
    b0s, gaps, dets, flags = [], [], [], []
    for p in pts:
        fb = fundamental_bundle(spec, p)
        require_nondegenerate(fb)
        B = fld.values(spec, p.x)
        B_low = fb.g.data @ B
        y = np.array(p.y)
        B0 = float(B_low @ y)
        B2 = float(B_low @ B)
        gap = B2 * fb.F ** 2 - B0 ** 2
        scale = max(1.0, float(np.max(np.abs(fb.g.data)))) * max(1.0, float(B @ B)) * max(1.0, fb.F ** 2)
        try:
            det = float(np.linalg.det(h_cov_deriv(spec, fld.as_field(spec), p).data))
        except FinslerLabError:
            det = float("nan")
        b0s.append(B0)
        gaps.append(gap)
        dets.append(det)
        flags.append({"B0_small": abs(B0) <= tol * math.sqrt(scale),
                      "gap_small": abs(gap) <= tol * scale})
    return {"B0_values": b0s, "BF2_minus_B02_values": gaps, "det_h_cov": dets, "flags": flags,
            "any_flagged": any(f["B0_small"] or f["gap_small"] for f in flags)}


def gradient_diagnostic(spec: MetricSpec, fld: VectorFieldSpec, p: Bindings,
                        y_samples: Sequence | None = None) -> dict:
    """Is lambda_i = g_ij B^j a y-independent gradient?  Evidence only, no verdict.

    Reports the spread of lambda over the y-samples and the antisymmetric part
    of d_k lambda_i at ``p`` (which vanishes for a gradient).
    """
    v = point_values(spec, p, 2)
    _, dx, _ = fld.as_field(spec).jet(spec, p)
    B = fld.values(spec, p.x)
    lam = np.asarray(v["Y2"]) @ B
    # d_k lambda_i = d_k g_ij B^j + g_ij d_k B^j
    dlam = np.einsum("kij,j->ik", v["X2"], B) + np.asarray(v["Y2"]) @ dx
    curl = float(np.max(np.abs(dlam - dlam.T)))
    spread = 0.0
    for y in y_samples or ():
        try:
            fb = fundamental_bundle(spec, Bindings(p.x, y))
        except FinslerLabError:
            continue
        spread = max(spread, float(np.max(np.abs(fb.g.data @ B - lam))))
    return {"lambda": lam.tolist(), "curl_max": curl, "y_spread": spread,
            "nonzero": bool(np.max(np.abs(lam)) > 0)}


@dataclass
class SCFieldReport:
    xs: list
    nullspaces: list
    pointwise_dims: list
    consistent_dimension: int
    candidate_field: VectorFieldSpec | str
    candidate_angles: list = field(default_factory=list)
    residual_stats: dict = field(default_factory=dict)
    invariants_check: dict = field(default_factory=dict)
    c_zero: bool = False
    angle_tol: float = 1e-3

    def to_dict(self):
        return {
            "xs": [list(x) for x in self.xs],
            "nullspaces": [ns.to_dict() for ns in self.nullspaces],
            "pointwise_dims": self.pointwise_dims,
            "consistent_dimension": self.consistent_dimension,
            "candidate_field": (self.candidate_field.to_dict()
                                if isinstance(self.candidate_field, VectorFieldSpec) else "none"),
            "candidate_angles": self.candidate_angles,
            "residual_stats": self.residual_stats,
            "invariants_check": self.invariants_check,
            "c_zero": self.c_zero,
            "angle_tol": self.angle_tol,
        }


def _x_samples(spec, x_samples, seed):
    if isinstance(x_samples, int):
        return [p.x for p in sample_points(spec, x_samples, seed)]
    return [tuple(float(v) for v in x) for x in x_samples]


def _neighbour(x, seed, k):
    rng = np.random.default_rng(seed * 7919 + k)
    d = rng.standard_normal(len(x))
    d /= np.linalg.norm(d)
    return tuple(np.asarray(x) + 1e-5 * (1.0 + float(np.linalg.norm(x))) * d)


def sc_detect(spec: MetricSpec, x_samples=5, y_samples_per_x=None, tol: float = 1e-8,
              seed: int = 0, angle_tol: float = 1e-3,
              expected: Sequence[VectorFieldSpec] = ()) -> SCFieldReport:
    """Null spaces at each x and the dimension that persists under small moves of x.

    At every x a second null space is computed at a point displaced by about
    1e-5; the number of principal angles below ``angle_tol`` between the two is
    that x's continuous dimension, and ``consistent_dimension`` is its minimum
    over all x.  ``candidate_field`` is the first of ``expected`` whose
    direction lies inside every null space.
    """
    n = spec.dim
    xs = _x_samples(spec, x_samples, seed)
    count = y_samples_per_x if isinstance(y_samples_per_x, int) else max(2 * _min_samples(n), 12)
    spaces, dims, cdims = [], [], []
    for k, x in enumerate(xs):
        if y_samples_per_x is None or isinstance(y_samples_per_x, int):
            ys = sample_directions(spec, x, count, seed=seed * 1000 + k)
        else:
            ys = y_samples_per_x[k]
        ns = sc_nullspace_at(spec, x, ys, tol)
        spaces.append(ns)
        dims.append(ns.dim)
        if ns.c_zero:
            cdims.append(n)
            continue
        xn = _neighbour(x, seed, k)
        try:
            ys2 = sample_directions(spec, xn, count, seed=seed * 1000 + k)
            ns2 = sc_nullspace_at(spec, xn, ys2, tol)
        except FinslerLabError:
            cdims.append(0)
            continue
        ang = principal_angles(ns.basis, ns2.basis)
        cdims.append(int(np.sum(ang < angle_tol)))
    consistent = min(cdims) if cdims else 0
    c_zero = bool(spaces) and all(ns.c_zero for ns in spaces)
    candidate, cand_angles = "none", []
    if consistent >= 1 and not c_zero:
        for fld in expected:
            angles = []
            for x, ns in zip(xs, spaces):
                v = fld.values(spec, x)
                nv = np.linalg.norm(v)
                angles.append(float(principal_angles(ns.basis, (v / nv)[:, None])[0]) if nv > 0
                              else float("inf"))
            if all(a < angle_tol for a in angles):
                candidate, cand_angles = fld, angles
                break
    report = SCFieldReport(xs, spaces, dims, consistent, candidate, cand_angles,
                           c_zero=c_zero, angle_tol=angle_tol)
    if isinstance(candidate, VectorFieldSpec):
        pts = []
        for k, x in enumerate(xs):
            for y in sample_directions(spec, x, 2, seed=seed * 1000 + 500 + k):
                pts.append(Bindings(x, y))
        sc = check_condition(spec, candidate, "SC", pts, tol=max(tol, 1e-7))
        report.residual_stats = {"SC": {"max_residual": sc.max_residual, "passed": sc.passed}}
        report.invariants_check = independence_invariants(spec, candidate, pts)
    return report
