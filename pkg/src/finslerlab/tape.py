"""Flatten expression DAGs into register tapes and evaluate them.

The evaluation kernel comes from the compiled ``_tape`` extension when it is
importable and from :mod:`finslerlab._tape_py` otherwise.  Setting
``FINSLERLAB_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainViolation, NonFiniteResult, UnknownIdentifier
from .expr import Expr, _postorder, to_source

if os.environ.get("FINSLERLAB_PURE_PYTHON") == "1":
    from . import _tape_py as _backend
else:
    try:
        from . import _tape as _backend
    except ImportError:  # extension not built
        from . import _tape_py as _backend

BACKEND = _backend.BACKEND

OPCODES = {
    "const": 0, "x": 1, "y": 2, "param": 3, "neg": 4, "sqrt": 5, "sin": 6,
    "cos": 7, "exp": 8, "log": 9, "add": 10, "sub": 11, "mul": 12, "div": 13,
    "powi": 14, "powf": 15, "pow_half": 16, "pow_third": 17,
}

__all__ = ["Tape", "compile_tape", "BACKEND", "worker_count"]


def worker_count() -> int:
    try:
        n = int(os.environ.get("FINSLERLAB_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def _short(e: Expr, limit=160) -> str:
    s = to_source(e)
    return s if len(s) <= limit else s[: limit - 3] + "..."


class Tape:
    """Straight-line program computing several expressions at once."""

    def __init__(self, roots: Sequence[Expr], backend=None):
        backend = backend or _backend
        self.roots = tuple(roots)
        order = _postorder(self.roots)
        index = {node: k for k, node in enumerate(order)}
        self.param_names = tuple(sorted({n.value for n in order if n.op == "param"}))
        pidx = {name: k for k, name in enumerate(self.param_names)}
        n = len(order)
        op = np.zeros(n, dtype=np.intc)
        a = np.zeros(n, dtype=np.intc)
        b = np.zeros(n, dtype=np.intc)
        c = np.zeros(n, dtype=np.float64)
        for k, node in enumerate(order):
            kind = node.op
            if kind == "pow":
                p = node.value
                den = getattr(p, "denominator", None)
                if den == 1:
                    kind, c[k] = "powi", float(p)
                elif den in (2, 3):
                    # exact roots first: (216)^(1/3) must come out as 6
                    kind = "pow_half" if den == 2 else "pow_third"
                    c[k] = float(p.numerator)
                else:
                    kind, c[k] = "powf", float(p)
            elif kind == "const":
                c[k] = float(node.value)
            elif kind in ("x", "y"):
                a[k] = node.value
            elif kind == "param":
                a[k] = pidx[node.value]
            op[k] = OPCODES[kind]
            if node.args:
                a[k] = index[node.args[0]]
                if len(node.args) > 1:
                    b[k] = index[node.args[1]]
        self.nodes = order
        self.size = n
        root_idx = np.array([index[r] for r in self.roots], dtype=np.intc)
        self.backend = backend.BACKEND
        self._runner = backend.Runner(op, a, b, c, root_idx)

    def param_vector(self, params: Mapping[str, float]) -> np.ndarray:
        missing = [p for p in self.param_names if p not in params]
        if missing:
            raise UnknownIdentifier(f"unbound parameter(s): {', '.join(missing)}")
        return np.array([float(params[p]) for p in self.param_names], dtype=np.float64)

    def run(self, X, Y, params: Mapping[str, float] | None = None, threads: int | None = None):
        """Evaluate at every row of ``X``/``Y``.

        Returns ``(values, status, bad)``; ``status`` is 0 for success, 1 for
        a domain violation and 2 for a non-finite root, ``bad`` the offending
        node index (see :meth:`error_for`).
        """
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        Y = np.ascontiguousarray(np.atleast_2d(np.asarray(Y, dtype=np.float64)))
        P = self.param_vector(params or {})
        m = X.shape[0]
        out = np.zeros((m, len(self.roots)), dtype=np.float64)
        status = np.zeros(m, dtype=np.intc)
        bad = np.full(m, -1, dtype=np.intc)
        threads = worker_count() if threads is None else threads
        if threads > 1 and m >= 2 * threads:
            bounds = np.linspace(0, m, threads + 1).astype(int)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(
                    lambda lo_hi: self._runner(X[lo_hi[0]:lo_hi[1]], Y[lo_hi[0]:lo_hi[1]], P,
                                               out[lo_hi[0]:lo_hi[1]], status[lo_hi[0]:lo_hi[1]],
                                               bad[lo_hi[0]:lo_hi[1]]),
                    zip(bounds[:-1], bounds[1:]),
                ))
        else:
            self._runner(X, Y, P, out, status, bad)
        return out, status, bad

    def error_for(self, status: int, bad: int) -> Exception:
        node = self.nodes[bad] if bad >= 0 else None
        where = f": {_short(node)}" if node is not None else ""
        if status == 1:
            return DomainViolation(f"domain violation in subexpression{where}", node)
        if status == 2:
            return NonFiniteResult(f"non-finite result{where}", node)
        return RuntimeError(f"tape evaluation failed with status {status}")

    def __call__(self, x, y, params: Mapping[str, float] | None = None) -> np.ndarray:
        """Evaluate at one point, raising on domain violations."""
        out, status, bad = self.run(np.asarray(x, float).reshape(1, -1),
                                    np.asarray(y, float).reshape(1, -1), params, threads=1)
        if status[0]:
            raise self.error_for(int(status[0]), int(bad[0]))
        return out[0]


@lru_cache(maxsize=512)
def compile_tape(roots: tuple) -> Tape:
    return Tape(roots)
