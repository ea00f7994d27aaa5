"""Sampled membership tests for the special classes of Finsler metrics."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .connections import connection_bundle
from .dsl import Bindings, MetricSpec
from .sampling import Box, sample_points
from .tape import worker_count
from .tensors import FundamentalBundle, fundamental_bundle, require_nondegenerate

__all__ = [
    "PointClassification", "ClassificationReport", "classify_point", "classify_metric",
    "c_reducible_model", "c2like_model", "semi_c_fit", "main_scalar", "CLASSES",
]

CLASSES = ("riemannian", "berwald", "landsberg", "c_reducible", "c2like", "semi_c_reducible",
           "reversible")


def c_reducible_model(h: np.ndarray, C_vec: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    return (np.einsum("ij,k->ijk", h, C_vec) + np.einsum("ki,j->ijk", h, C_vec)
            + np.einsum("jk,i->ijk", h, C_vec)) / (n + 1)


def c2like_model(C_vec: np.ndarray, C_sq: float) -> np.ndarray:
    return np.einsum("i,j,k->ijk", C_vec, C_vec, C_vec) / C_sq


def semi_c_fit(C: np.ndarray, M1: np.ndarray, M2: np.ndarray):
    """Least-squares r for C = r M1 + (1 - r) M2; returns (r, t, residual, degenerate).

    When M1 and M2 coincide (always the case in two dimensions) r is not
    identifiable and r = 1 is reported.
    """
    D = M1 - M2
    dd = float(np.sum(D * D))
    scale = max(float(np.sum(M1 * M1)), float(np.sum(M2 * M2)), 1e-300)
    degenerate = dd <= 1e-24 * scale
    r = 1.0 if degenerate else float(np.sum((C - M2) * D)) / dd
    t = 1.0 - r
    resid = float(np.max(np.abs(C - r * M1 - t * M2)))
    return r, t, resid, degenerate


def main_scalar(fb: FundamentalBundle):
    """(J, eta, residual) with F C_ijk = J eta_i eta_j eta_k in two dimensions."""
    g_inv = fb.g_inv.data
    lu = fb.l_up.data
    eta = math.sqrt(fb.det_g) * np.array([lu[1], -lu[0]])
    eta_up = g_inv @ eta
    J = fb.F * float(np.einsum("ijk,i,j,k->", fb.C.data, eta_up, eta_up, eta_up))
    resid = float(np.max(np.abs(fb.F * fb.C.data - J * np.einsum("i,j,k->ijk", eta, eta, eta))))
    return J, eta, resid


def _F_at(spec, x, y):
    try:
        return fundamental_bundle(spec, Bindings(x, y)).F
    except Exception:
        return float("nan")


@dataclass
class PointClassification:
    riemannian_residual: float
    berwald_residual: float
    landsberg_residual: float
    c_reducible_residual: float | str
    c2like_residual: float
    semi_c: dict | str
    reversible_residual: float
    main_scalar_2d: float | str
    main_scalar_residual: float | str = "n/a"
    scale: float = 1.0
    C_sq: float = 0.0

    def residual(self, cls: str):
        if cls == "riemannian":
            return self.riemannian_residual
        if cls == "berwald":
            return self.berwald_residual
        if cls == "landsberg":
            return self.landsberg_residual
        if cls == "c_reducible":
            return self.c_reducible_residual
        if cls == "c2like":
            return self.c2like_residual
        if cls == "semi_c_reducible":
            return self.semi_c if isinstance(self.semi_c, str) else self.semi_c["residual"]
        if cls == "reversible":
            return self.reversible_residual
        raise KeyError(cls)

    def to_dict(self):
        return {
            "riemannian_residual": self.riemannian_residual,
            "berwald_residual": self.berwald_residual,
            "landsberg_residual": self.landsberg_residual,
            "c_reducible_residual": self.c_reducible_residual,
            "c2like_residual": self.c2like_residual,
            "semi_c": self.semi_c,
            "reversible_residual": self.reversible_residual,
            "main_scalar_2d": self.main_scalar_2d,
            "main_scalar_residual": self.main_scalar_residual,
            "scale": self.scale,
            "C_sq": self.C_sq,
        }


def classify_point(spec: MetricSpec, p: Bindings, tol: float = 1e-8) -> PointClassification:
    """Residuals of every class model at one point (max-abs over components).

    ``tol`` decides when C^2 counts as zero, in which case the C2-like model
    is taken as 0 and the semi-C fit is ``"undefined"``.
    """
    fb = fundamental_bundle(spec, p)
    require_nondegenerate(fb)
    cb = connection_bundle(spec, p)
    n = spec.dim
    C = fb.C.data
    scale = max(1.0, float(np.max(np.abs(fb.g.data))))
    c_max = float(np.max(np.abs(C)))
    M1 = c_reducible_model(fb.h.data, fb.C_vec.data)
    c_red = float(np.max(np.abs(C - M1))) if n >= 3 else "n/a"
    c_sq_zero = not fb.C_sq > (tol * scale) ** 2
    if c_sq_zero:
        c2 = c_max
        semi = "undefined"
    else:
        M2 = c2like_model(fb.C_vec.data, fb.C_sq)
        c2 = float(np.max(np.abs(C - M2)))
        r, t, res, degenerate = semi_c_fit(C, M1, M2)
        semi = {"r": r, "t": t, "residual": res, "identifiable": not degenerate}
    y = np.array(p.y)
    F_minus = _F_at(spec, p.x, tuple(-y))
    rev = abs(fb.F - F_minus) if math.isfinite(F_minus) else float("inf")
    if n == 2:
        J, _, ms_res = main_scalar(fb)
    else:
        J, ms_res = "n/a", "n/a"
    return PointClassification(
        riemannian_residual=c_max,
        berwald_residual=float(np.max(np.abs(cb.G_tensor.data))),
        landsberg_residual=float(np.max(np.abs(cb.L.data))),
        c_reducible_residual=c_red,
        c2like_residual=c2,
        semi_c=semi,
        reversible_residual=rev,
        main_scalar_2d=J,
        main_scalar_residual=ms_res,
        scale=scale,
        C_sq=fb.C_sq,
    )


@dataclass
class ClassificationReport:
    points: list
    samples: list
    verdicts: dict
    sample_info: dict = field(default_factory=dict)
    tol: float = 1e-8

    def is_member(self, cls: str) -> bool:
        return self.verdicts[cls]["verdict"] == "member"

    def to_dict(self):
        return {
            "samples": [{"x": list(p.x), "y": list(p.y)} for p in self.samples],
            "points": [pc.to_dict() for pc in self.points],
            "verdicts": self.verdicts,
            "sample_info": self.sample_info,
            "tol": self.tol,
        }


def _verdict(points, cls, tol):
    values = [(pc.residual(cls), tol * pc.scale) for pc in points]
    defined = [(v, th) for v, th in values if not isinstance(v, str)]
    if not defined:
        tag = values[0][0] if values else "n/a"
        return {"verdict": tag, "threshold": tol, "max_residual": tag, "points_used": 0}
    worst = max(v for v, _ in defined)
    member = all(v < th for v, th in defined)
    return {"verdict": "member" if member else "non-member", "threshold": tol,
            "max_residual": worst, "points_used": len(defined)}


def classify_metric(spec: MetricSpec, seed: int = 0, n_points: int = 20, box: Box = Box(),
                    tol: float = 1e-8) -> ClassificationReport:
    """Classify at ``n_points`` seeded samples; verdicts need every residual below
    ``tol * max(1, max|g_ij|)`` at its point."""
    samples = sample_points(spec, n_points, seed, box)
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda p: classify_point(spec, p, tol), samples))
    else:
        points = [classify_point(spec, p, tol) for p in samples]
    verdicts = {cls: _verdict(points, cls, tol) for cls in CLASSES}
    info = {"seed": seed, "n_points": n_points, "box": box.to_dict(),
            "threshold_scale": "max(1, max|g_ij|) per point"}
    return ClassificationReport(points, samples, verdicts, info, tol)
