"""Central finite differences, used as an independent oracle in tests and for
numeric-only fields."""
from __future__ import annotations

from typing import Callable

import numpy as np

# sixth-order central stencil for the first derivative
_OFFSETS = np.array([-3, -2, -1, 1, 2, 3], dtype=float)
_WEIGHTS = np.array([-1, 9, -45, 45, -9, 1], dtype=float) / 60.0


def central_diff(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, i: int, h: float,
                 order6: bool = True):
    """d f / d z_i at ``z``; ``f`` may be array-valued."""
    z = np.asarray(z, dtype=float)
    if not order6:
        e = np.zeros_like(z)
        e[i] = h
        return (np.asarray(f(z + e)) - np.asarray(f(z - e))) / (2 * h)
    acc = 0.0
    for off, w in zip(_OFFSETS, _WEIGHTS):
        e = np.zeros_like(z)
        e[i] = off * h
        acc = acc + w * np.asarray(f(z + e))
    return acc / h


def nested_diff(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, idx, h: float):
    """Mixed partial d^k f / dz_{idx[0]} ... dz_{idx[-1]} by nested stencils."""
    idx = tuple(idx)
    if not idx:
        return np.asarray(f(np.asarray(z, dtype=float)))
    head, rest = idx[0], idx[1:]
    return central_diff(lambda w: nested_diff(f, w, rest, h), z, head, h)


def default_step(order: int) -> float:
    # balances truncation against roundoff for the 6th-order stencil
    return {0: 0.0, 1: 1e-3, 2: 5e-3, 3: 1e-2, 4: 2e-2}.get(order, 3e-2)


def stencil_partial(f_batch: Callable[[np.ndarray], np.ndarray], z: np.ndarray, idx, h) -> float:
    """Same value as :func:`nested_diff` but with one vectorized call.

    ``f_batch`` maps an (m, len(z)) array of points to m values.  ``h`` is a
    scalar or one step per coordinate of ``z``.
    """
    idx = tuple(idx)
    z = np.asarray(z, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    k = len(idx)
    if k == 0:
        return float(f_batch(z[None, :])[0])
    grids = np.meshgrid(*([np.arange(len(_OFFSETS))] * k), indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1)
    pts = np.repeat(z[None, :], len(combos), axis=0)
    w = np.ones(len(combos))
    for s, var in enumerate(idx):
        pts[:, var] += _OFFSETS[combos[:, s]] * h[var]
        w *= _WEIGHTS[combos[:, s]] / h[var]
    return float(w @ np.asarray(f_batch(pts), dtype=float))
