"""Spray, nonlinear connection, Berwald and Cartan connections, covariant
derivatives and the Landsberg and T tensors.

The spray is G^i = 1/4 g^{il} (y^k d_k dot-d_l F^2 - d_l F^2).  Its y-partials
are obtained by differentiating g_{il} G^i = W_l / 4 with Leibniz' rule, which
only needs y-partials of g (never of g^{-1}).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .dsl import Bindings, MetricSpec
from .errors import DegenerateMetric, FinslerLabError
from .expr import Expr, variables, xvar, yvar
from .symdiff import differentiate
from .tape import compile_tape
from .tensors import (
    FundamentalBundle, Tensor, _bundle_from_values, _check_point, _effective_spec,
    point_values, require_nondegenerate,
)

__all__ = [
    "ConnectionBundle", "connection_bundle", "h_cov_deriv", "v_cov_deriv", "t_tensor",
    "ExprField", "CallableField", "MetricField", "SUPPORTED_VALENCES",
]

SUPPORTED_VALENCES = ("u", "l", "ul", "lu", "uu", "ll", "ull", "lll")


@dataclass(frozen=True)
class ConnectionBundle:
    G: Tensor
    N: Tensor
    G_conn: Tensor
    G_tensor: Tensor
    Gamma: Tensor
    L: Tensor
    T4: Tensor
    T2: Tensor
    fundamental: FundamentalBundle


@dataclass(frozen=True)
class _Ctx:
    fb: FundamentalBundle
    v: dict
    G: np.ndarray
    N: np.ndarray
    G2: np.ndarray
    G3: np.ndarray
    Gamma: np.ndarray


def _spray_jets(v: dict, g_inv: np.ndarray, y: np.ndarray):
    """G and its first three y-partials from the level-2 derivative table."""
    X0, X1, X2, X3, X4 = (v[f"X{m}"] for m in range(5))
    Y3, Y4, Y5 = v["Y3"], v["Y4"], v["Y5"]
    W0 = 2.0 * (y @ X1 - X0)
    W1 = 2.0 * (np.einsum("k,kla->la", y, X2) + X1.T - X1)
    W2 = 2.0 * (np.einsum("k,klab->lab", y, X3) + np.einsum("alb->lab", X2)
                + np.einsum("bla->lab", X2) - X2)
    W3 = 2.0 * (np.einsum("k,klabc->labc", y, X4) + np.einsum("albc->labc", X3)
                + np.einsum("blac->labc", X3) + np.einsum("clab->labc", X3) - X3)
    G0 = 0.25 * g_inv @ W0
    rhs = 0.25 * W1 - np.einsum("lia,i->la", Y3, G0)
    G1 = g_inv @ rhs
    rhs = (0.25 * W2 - np.einsum("lib,ia->lab", Y3, G1) - np.einsum("lia,ib->lab", Y3, G1)
           - np.einsum("liab,i->lab", Y4, G0))
    G2 = np.einsum("il,lab->iab", g_inv, rhs)
    rhs = (0.25 * W3
           - np.einsum("lic,iab->labc", Y3, G2) - np.einsum("lib,iac->labc", Y3, G2)
           - np.einsum("lia,ibc->labc", Y3, G2)
           - np.einsum("libc,ia->labc", Y4, G1) - np.einsum("liac,ib->labc", Y4, G1)
           - np.einsum("liab,ic->labc", Y4, G1)
           - np.einsum("liabc,i->labc", Y5, G0))
    G3 = np.einsum("il,labc->iabc", g_inv, rhs)
    return G0, G1, G2, G3


def _delta_g(v: dict, N: np.ndarray) -> np.ndarray:
    """D[j, k, r] = delta_j g_kr = d_j g_kr - N^s_j dot-d_s g_kr."""
    return v["X2"] - np.einsum("sj,krs->jkr", N, v["Y3"])


@lru_cache(maxsize=2048)
def _ctx_cached(spec: MetricSpec, x: tuple, y: tuple) -> _Ctx:
    p = Bindings(x, y)
    v = point_values(spec, p, 2)
    yv = np.array(y)
    fb = _bundle_from_values(v, yv)
    require_nondegenerate(fb)
    g_inv = fb.g_inv.data
    G0, G1, G2, G3 = _spray_jets(v, g_inv, yv)
    D = _delta_g(v, G1)
    low = 0.5 * (np.einsum("jkr->rjk", D) + np.einsum("kjr->rjk", D) - D)
    Gamma = np.einsum("ir,rjk->ijk", g_inv, low)
    return _Ctx(fb, v, G0, G1, G2, G3, Gamma)


def _context(spec: MetricSpec, p: Bindings) -> _Ctx:
    _check_point(spec, p)
    return _ctx_cached(_effective_spec(spec, p), p.x, p.y)


# fields -------------------------------------------------------------------

class ExprField:
    """Tensor field whose components are DSL expressions in (x, y, params)."""

    def __init__(self, components, variance: str, params=None):
        self.params = dict(params or {})
        arr = np.empty(np.shape(components), dtype=object)
        arr[...] = components if isinstance(components, np.ndarray) else _nested(components)
        if arr.ndim != len(variance):
            raise ValueError(f"component array rank {arr.ndim} does not match variance {variance!r}")
        self.components = arr
        self.variance = variance

    def _tape(self, n: int):
        flat = list(self.components.ravel())
        roots = list(flat)
        for k in range(n):
            roots.extend(differentiate(e, xvar(k)) for e in flat)
        for k in range(n):
            roots.extend(differentiate(e, yvar(k)) for e in flat)
        return compile_tape(tuple(roots))

    def jet(self, spec: MetricSpec, p: Bindings):
        n = spec.dim
        for e in self.components.ravel():
            for _, i in variables(e):
                if i >= n:
                    raise FinslerLabError(f"field references index {i + 1} beyond dim={n}")
        tape = self._tape(n)
        vals = tape(p.x, p.y, {**spec.params, **self.params, **dict(p.params)})
        m = self.components.size
        shape = self.components.shape
        value = vals[:m].reshape(shape)
        dx = np.moveaxis(vals[m:m + n * m].reshape((n,) + shape), 0, -1)
        dy = np.moveaxis(vals[m + n * m:].reshape((n,) + shape), 0, -1)
        return value, dx, dy


def _nested(components):
    out = np.empty(np.shape(components), dtype=object)
    for idx in np.ndindex(out.shape):
        c = components
        for i in idx:
            c = c[i]
        out[idx] = c
    return out


class CallableField:
    """Field given by a numeric callback ``fn(x, y) -> array``.

    Partials use second-order central differences with step 1e-5 (1 + |z_i|).
    """

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], variance: str):
        self.fn = fn
        self.variance = variance

    def jet(self, spec: MetricSpec, p: Bindings):
        x = np.array(p.x)
        y = np.array(p.y)
        value = np.asarray(self.fn(x, y), dtype=float)
        n = len(x)
        dx = np.empty(value.shape + (n,))
        dy = np.empty(value.shape + (n,))
        for k in range(n):
            e = np.zeros(n)
            hx = 1e-5 * (1 + abs(x[k]))
            e[k] = hx
            dx[..., k] = (np.asarray(self.fn(x + e, y)) - np.asarray(self.fn(x - e, y))) / (2 * hx)
            hy = 1e-5 * (1 + abs(y[k]))
            e[k] = hy
            dy[..., k] = (np.asarray(self.fn(x, y + e)) - np.asarray(self.fn(x, y - e))) / (2 * hy)
        return value, dx, dy


class MetricField:
    """The metric's own g_ij (``"g"``) or C_ijk (``"C"``) as a field."""

    def __init__(self, which: str):
        if which not in ("g", "C"):
            raise ValueError("MetricField supports 'g' and 'C'")
        self.which = which
        self.variance = "ll" if which == "g" else "lll"

    def jet(self, spec: MetricSpec, p: Bindings):
        v = point_values(spec, p, 2)
        if self.which == "g":
            return np.array(v["Y2"]), np.moveaxis(v["X2"], 0, -1), np.array(v["Y3"])
        return 0.5 * v["Y3"], 0.5 * np.moveaxis(v["X3"], 0, -1), 0.5 * np.array(v["Y4"])


def _corrections(value: np.ndarray, variance: str, conn: np.ndarray) -> np.ndarray:
    """Sum of connection terms, one per slot; ``conn[i, m, k]``."""
    r = len(variance)
    total = np.zeros(value.shape + (conn.shape[0],))
    for s, kind in enumerate(variance):
        if kind == "u":
            t = np.tensordot(value, conn, axes=([s], [1]))
            total += np.moveaxis(t, r - 1, s)
        else:
            t = np.tensordot(value, conn, axes=([s], [0]))
            total -= np.moveaxis(t, r - 1, s)
    return total


def _check_valence(field):
    if field.variance not in SUPPORTED_VALENCES:
        raise FinslerLabError(f"unsupported valence {field.variance!r}; "
                              f"supported: {', '.join(SUPPORTED_VALENCES)}")


def h_cov_deriv(spec: MetricSpec, field, p: Bindings) -> Tensor:
    """Horizontal covariant derivative X_{|k} (derivative index last)."""
    _check_valence(field)
    ctx = _context(spec, p)
    value, dx, dy = field.jet(spec, p)
    delta = dx - np.tensordot(dy, ctx.N, axes=([-1], [0]))
    return Tensor(delta + _corrections(value, field.variance, ctx.Gamma), field.variance + "l")


def v_cov_deriv(spec: MetricSpec, field, p: Bindings) -> Tensor:
    """Vertical covariant derivative X|_k (derivative index last)."""
    _check_valence(field)
    ctx = _context(spec, p)
    value, _, dy = field.jet(spec, p)
    return Tensor(dy + _corrections(value, field.variance, ctx.fb.C_mixed.data), field.variance + "l")


def _t_from(ctx: _Ctx):
    fb = ctx.fb
    C = fb.C.data
    Cv = 0.5 * np.asarray(ctx.v["Y4"]) + _corrections(C, "lll", fb.C_mixed.data)
    l = fb.l.data
    T4 = (fb.F * Cv + np.einsum("hij,k->hijk", C, l) + np.einsum("hik,j->hijk", C, l)
          + np.einsum("hjk,i->hijk", C, l) + np.einsum("ijk,h->hijk", C, l))
    T2 = np.einsum("ijhk,hk->ij", T4, fb.g_inv.data)
    return T4, T2


def t_tensor(spec: MetricSpec, p: Bindings):
    """(T_hijk, T_ij) with T_ij the g-trace over the last two slots."""
    T4, T2 = _t_from(_context(spec, p))
    return Tensor(T4, "llll"), Tensor(T2, "ll")


def connection_bundle(spec: MetricSpec, p: Bindings) -> ConnectionBundle:
    """Spray, nonlinear connection, Berwald/Cartan coefficients, L and T at ``p``.

    Raises :class:`DegenerateMetric` when g is singular.
    """
    ctx = _context(spec, p)
    fb = ctx.fb
    L = 0.5 * fb.F * np.einsum("h,hijk->ijk", fb.l.data, ctx.G3)
    T4, T2 = _t_from(ctx)
    return ConnectionBundle(
        G=Tensor(ctx.G, "u"), N=Tensor(ctx.N, "ul"), G_conn=Tensor(ctx.G2, "ull"),
        G_tensor=Tensor(ctx.G3, "ulll"), Gamma=Tensor(ctx.Gamma, "ull"), L=Tensor(L, "lll"),
        T4=Tensor(T4, "llll"), T2=Tensor(T2, "ll"), fundamental=fb,
    )
