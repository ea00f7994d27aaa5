"""Pointwise Finsler tensors computed from a metric's energy.

Every quantity here is assembled from one evaluation of a tape holding the
symbolic y-partials of E (and, for the connection layer, the mixed x/y
partials).  Derivative tables are built once per :class:`MetricSpec` and
shared read-only afterwards.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement, product

import numpy as np

from .dsl import Bindings, MetricSpec, domain_holds
from .errors import DegenerateMetric, DomainViolation, FinslerLabError
from .expr import Expr, const, func, mul, xvar, yvar
from .symdiff import differentiate
from .tape import Tape

__all__ = [
    "Tensor", "FundamentalBundle", "DomainStatus", "MetricKernel", "kernel_for",
    "fundamental_bundle", "domain_probe", "point_values", "DEGENERACY_RTOL",
]

DEGENERACY_RTOL = 1e-10
BLOWUP_LIMIT = 1e6
PROBE_RADIUS = 1e-4


@dataclass(frozen=True)
class Tensor:
    """Dense components plus slot variance, e.g. ``"ull"`` for C^i_jk."""

    data: np.ndarray
    variance: str

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def dim(self) -> int:
        return self.data.shape[0] if self.data.ndim else 0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def __getitem__(self, idx):
        return self.data[idx]

    def tolist(self):
        return self.data.tolist()


def _sym_keys(n: int, order: int):
    return list(combinations_with_replacement(range(n), order))


def _dense_index(n: int, order: int) -> np.ndarray:
    """For every full multi-index, the position of its sorted key."""
    pos = {k: i for i, k in enumerate(_sym_keys(n, order))}
    return np.array([pos[tuple(sorted(t))] for t in product(range(n), repeat=order)], dtype=np.intp)


class MetricKernel:
    """Symbolic derivative tables of one metric and their compiled tapes.

    Level 1 covers E, its y-partials up to order 3 and F = sqrt(2E) with two
    y-partials.  Level 2 adds y-partials of order 4 and 5 and the mixed
    partials d/dx_k d^m/dy (m <= 4) needed by the spray and the connections.
    """

    def __init__(self, spec: MetricSpec):
        self.spec = spec
        self.n = spec.dim
        self._lock = threading.Lock()
        self._tapes: dict[int, Tape] = {}
        self._layout: dict[int, dict] = {}

    def _y_table(self, root: Expr, max_order: int) -> dict:
        n = self.n
        table = {(): root}
        for order in range(1, max_order + 1):
            for key in _sym_keys(n, order):
                table[key] = differentiate(table[key[:-1]], yvar(key[-1]))
        return table

    def _build(self, level: int):
        n = self.n
        E = self.spec.energy
        ytab = self._y_table(E, 3 if level == 1 else 5)
        F = func("sqrt", mul(const(2), E))
        ftab = self._y_table(F, 2)
        blocks = []  # (name, list of exprs, order, xfirst)
        for order in range(0, 4 if level == 1 else 6):
            blocks.append((f"Y{order}", [ytab[k] for k in _sym_keys(n, order)], order, False))
        for order in range(0, 3):
            blocks.append((f"F{order}", [ftab[k] for k in _sym_keys(n, order)], order, False))
        if level == 2:
            for order in range(0, 5):
                exprs = []
                for k in range(n):
                    xt = self._x_table(E, k)
                    exprs.extend(xt[key] for key in _sym_keys(n, order))
                blocks.append((f"X{order}", exprs, order, True))
        roots = []
        layout = {}
        for name, exprs, order, xfirst in blocks:
            layout[name] = (len(roots), len(exprs), order, xfirst)
            roots.extend(exprs)
        self._layout[level] = layout
        self._tapes[level] = Tape(roots)

    def _x_table(self, E, k):
        cache = self.__dict__.setdefault("_xcache", {})
        if k not in cache:
            cache[k] = self._y_table(differentiate(E, xvar(k)), 4)
        return cache[k]

    def tape(self, level: int) -> Tape:
        if level not in self._tapes:
            with self._lock:
                if level not in self._tapes:
                    self._build(level)
        return self._tapes[level]

    def unpack(self, level: int, values: np.ndarray) -> dict:
        """Turn a row of tape output into dense arrays keyed by block name."""
        n = self.n
        out = {}
        for name, (start, count, order, xfirst) in self._layout[level].items():
            flat = values[start:start + count]
            idx = _dense_index(n, order) if order else np.zeros(1, dtype=np.intp)
            if xfirst:
                per = len(_sym_keys(n, order))
                arr = flat.reshape(n, per)[:, idx].reshape((n,) + (n,) * order)
            else:
                arr = flat[idx].reshape((n,) * order) if order else flat[0]
            out[name] = arr
        return out


_kernels: dict = {}
_kernels_lock = threading.Lock()


def kernel_for(spec: MetricSpec) -> MetricKernel:
    k = _kernels.get(spec)
    if k is None:
        with _kernels_lock:
            k = _kernels.setdefault(spec, MetricKernel(spec))
    return k


def _effective_spec(spec: MetricSpec, p: Bindings) -> MetricSpec:
    if p.params:
        extra = {k: v for k, v in p.params.items() if spec.params.get(k) != v}
        if extra:
            return spec.with_params(**extra)
    return spec


@lru_cache(maxsize=4096)
def _cached_values(spec: MetricSpec, x: tuple, y: tuple, level: int):
    kern = kernel_for(spec)
    tape = kern.tape(level)
    out, status, bad = tape.run(np.array([x]), np.array([y]), spec.params, threads=1)
    if status[0]:
        raise tape.error_for(int(status[0]), int(bad[0]))
    vals = kern.unpack(level, out[0])
    for arr in vals.values():
        if isinstance(arr, np.ndarray):
            arr.setflags(write=False)
    return vals


def point_values(spec: MetricSpec, p: Bindings, level: int = 1) -> dict:
    """Raw derivative arrays at ``p``: ``Y0`` = E, ``Y2`` = g, ``X1[k, a]`` = d_k dot-d_a E, ..."""
    spec = _effective_spec(spec, p)
    if len(p.x) != spec.dim or len(p.y) != spec.dim:
        raise FinslerLabError(f"point has wrong dimension (expected {spec.dim})")
    return _cached_values(spec, p.x, p.y, level)


@dataclass(frozen=True)
class FundamentalBundle:
    F: float
    E: float
    g: Tensor
    g_inv: Tensor | None
    det_g: float
    l: Tensor
    l_up: Tensor
    l_der: Tensor
    h: Tensor
    C: Tensor
    C_mixed: Tensor | None
    C_vec: Tensor | None
    C_sq: float
    nondegenerate: bool
    y: np.ndarray

    @property
    def g_inv_valid(self) -> bool:
        return self.g_inv is not None


def is_degenerate(g: np.ndarray, det: float) -> bool:
    n = g.shape[0]
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    return not (abs(det) > DEGENERACY_RTOL * scale ** n) or scale == 0.0


def _check_point(spec: MetricSpec, p: Bindings):
    if not any(p.y):
        raise DomainViolation("y must be non-zero (slit tangent bundle)")
    if not domain_holds(_effective_spec(spec, p), p.x, p.y):
        raise DomainViolation("point lies outside the metric's domain")


def _bundle_from_values(v: dict, y: np.ndarray) -> FundamentalBundle:
    E = float(v["Y0"])
    if not E > 0:
        raise DomainViolation(f"energy must be positive on the slit bundle (E = {E!r})")
    F = float(np.sqrt(2.0 * E))
    g = np.array(v["Y2"])
    C = 0.5 * np.array(v["Y3"])
    l = np.array(v["Y1"]) / F
    l_up = y / F
    l_der = np.array(v["F2"])
    h = g - np.outer(l, l)
    det = float(np.linalg.det(g))
    ok = not is_degenerate(g, det)
    if ok:
        # LU with partial pivoting
        g_inv = np.linalg.solve(g, np.eye(len(y)))
        C_mixed = np.einsum("ir,rjk->ijk", g_inv, C)
        C_vec = np.einsum("ijk,jk->i", C, g_inv)
        C_sq = float(C_vec @ g_inv @ C_vec)
    else:
        g_inv = C_mixed = C_vec = None
        C_sq = float("nan")
    return FundamentalBundle(
        F=F, E=E, g=Tensor(g, "ll"), g_inv=None if g_inv is None else Tensor(g_inv, "uu"),
        det_g=det, l=Tensor(l, "l"), l_up=Tensor(l_up, "u"), l_der=Tensor(l_der, "ll"),
        h=Tensor(h, "ll"), C=Tensor(C, "lll"),
        C_mixed=None if C_mixed is None else Tensor(C_mixed, "ull"),
        C_vec=None if C_vec is None else Tensor(C_vec, "l"), C_sq=C_sq,
        nondegenerate=ok, y=y,
    )


def fundamental_bundle(spec: MetricSpec, p: Bindings) -> FundamentalBundle:
    """All zeroth-layer tensors (F, g, g^-1, l, h, C, C^i_jk, C_i, C^2) at ``p``.

    Raises :class:`DomainViolation` outside the domain.  A degenerate g is
    flagged through ``nondegenerate=False`` and ``g_inv=None``.
    """
    _check_point(spec, p)
    v = point_values(spec, p, 1)
    return _bundle_from_values(v, np.array(p.y))


def require_nondegenerate(fb: FundamentalBundle):
    if not fb.nondegenerate:
        raise DegenerateMetric(f"metric tensor is degenerate here (det g = {fb.det_g:.3e})")


@dataclass(frozen=True)
class DomainStatus:
    in_domain: bool
    smooth: bool
    nondegenerate: bool
    positive_definite: bool
    leading_minors: tuple
    blowup: float = float("nan")


def leading_minors(g: np.ndarray) -> tuple:
    return tuple(float(np.linalg.det(g[:k, :k])) for k in range(1, g.shape[0] + 1))


def _probe_directions(n: int) -> np.ndarray:
    rng = np.random.default_rng(20240601 + n)
    dirs = rng.standard_normal((3, 2 * n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.concatenate([dirs, -dirs])


def domain_probe(spec: MetricSpec, p: Bindings, radius: float = PROBE_RADIUS,
                 blowup_limit: float = BLOWUP_LIMIT) -> DomainStatus:
    """Regularity and definiteness of g at ``p``; never raises for bad points.

    ``smooth`` requires finite partials at ``p`` and at six points at relative
    ``radius`` around it, and a scale-free Cartan size F*max|C|/max|g| below
    ``blowup_limit``.
    """
    n = spec.dim
    nan_status = DomainStatus(False, False, False, False, (float("nan"),) * n)
    if not any(p.y):
        return nan_status
    try:
        fb = fundamental_bundle(spec, p)
    except FinslerLabError:
        return nan_status
    g = fb.g.data
    minors = leading_minors(g)
    gmax = float(np.max(np.abs(g)))
    blowup = fb.F * float(np.max(np.abs(fb.C.data))) / gmax if gmax > 0 else float("inf")
    smooth = bool(np.isfinite(blowup) and blowup <= blowup_limit)
    if smooth:
        base = np.concatenate([p.x, p.y])
        scale = radius * max(1.0, float(np.linalg.norm(base)))
        for d in _probe_directions(n):
            q = base + scale * d
            try:
                fundamental_bundle(spec, Bindings(q[:n], q[n:], p.params))
            except FinslerLabError:
                smooth = False
                break
    pd = fb.nondegenerate and all(m > 0 for m in minors)
    return DomainStatus(True, smooth, fb.nondegenerate, pd, minors, blowup)
