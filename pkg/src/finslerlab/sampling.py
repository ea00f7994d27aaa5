"""Deterministic rejection sampling of tangent points (x, y)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsl import Bindings, MetricSpec
from .errors import FinslerLabError, NoSamplesError
from .tensors import fundamental_bundle

__all__ = ["Box", "sample_points", "sample_directions", "usable"]


@dataclass(frozen=True)
class Box:
    """x-coordinates drawn with |x_i| in [lo, hi] and a random sign."""

    lo: float = 0.1
    hi: float = 2.0

    def to_dict(self):
        return {"x_abs_range": [self.lo, self.hi], "y": "unit sphere"}


def usable(spec: MetricSpec, p: Bindings) -> bool:
    """In the domain, E > 0, finite tensors and non-degenerate g."""
    try:
        fb = fundamental_bundle(spec, p)
    except FinslerLabError:
        return False
    return fb.nondegenerate


def _draw_x(rng, n, box):
    mag = rng.uniform(box.lo, box.hi, n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return mag * sign


def _draw_y(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def sample_points(spec: MetricSpec, n_points: int, seed: int = 0, box: Box = Box(),
                  max_tries_per_point: int = 200) -> list[Bindings]:
    """``n_points`` usable points; the sequence depends only on ``seed``."""
    rng = np.random.default_rng(seed)
    n = spec.dim
    out = []
    tries = 0
    budget = max_tries_per_point * max(n_points, 1)
    while len(out) < n_points:
        if tries >= budget:
            raise NoSamplesError(_no_samples_msg(spec, len(out), n_points, tries))
        tries += 1
        p = Bindings(_draw_x(rng, n, box), _draw_y(rng, n))
        if usable(spec, p):
            out.append(p)
    return out


def sample_directions(spec: MetricSpec, x, count: int, seed: int = 0,
                      max_tries_per_point: int = 200) -> list[np.ndarray]:
    """Unit y-vectors usable at the fixed base point ``x``."""
    rng = np.random.default_rng(seed)
    n = spec.dim
    out = []
    tries = 0
    while len(out) < count:
        if tries >= max_tries_per_point * max(count, 1):
            raise NoSamplesError(_no_samples_msg(spec, len(out), count, tries, x))
        tries += 1
        y = _draw_y(rng, n)
        if usable(spec, Bindings(x, y)):
            out.append(y)
    return out


def _no_samples_msg(spec, got, want, tries, x=None):
    from .dsl import domain_source
    pred = domain_source(spec.domain) if spec.domain is not None else "(none)"
    at = f" at x={list(map(float, x))}" if x is not None else ""
    return (f"found only {got} of {want} usable samples{at} after {tries} draws; "
            f"domain predicate: {pred}")
