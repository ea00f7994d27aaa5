"""Pure-Python tape evaluator, used when the compiled extension is absent.

The tape is translated once into straight-line Python source and compiled,
which is several times faster than interpreting opcodes in a loop.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_BINOPS = {10: "+", 11: "-", 12: "*"}
_CALLS = {6: "_sin", 7: "_cos", 8: "_exp"}


class _Violation(Exception):
    def __init__(self, k):
        self.k = k


def _powi(u, e):
    return u ** e


def _generate(op, a, b, c, roots) -> str:
    lines = ["def _point(x, y, p):"]
    emit = lines.append
    for k in range(len(op)):
        o = int(op[k])
        ak = int(a[k])
        r = f"r{k}"
        if o == 0:
            emit(f"    {r} = {float(c[k])!r}")
        elif o == 1:
            emit(f"    {r} = x[{ak}]")
        elif o == 2:
            emit(f"    {r} = y[{ak}]")
        elif o == 3:
            emit(f"    {r} = p[{ak}]")
        elif o == 4:
            emit(f"    {r} = -r{ak}")
        elif o in _BINOPS:
            emit(f"    {r} = r{ak} {_BINOPS[o]} r{int(b[k])}")
        elif o == 13:
            emit(f"    if r{int(b[k])} == 0.0: raise _Violation({k})")
            emit(f"    {r} = r{ak} / r{int(b[k])}")
        elif o == 14:
            e = int(c[k])
            if e < 0:
                emit(f"    if r{ak} == 0.0: raise _Violation({k})")
            emit(f"    {r} = r{ak} ** {e}")
        elif o == 15:
            emit(f"    if not r{ak} > 0.0: raise _Violation({k})")
            emit(f"    {r} = r{ak} ** {float(c[k])!r}")
        elif o in (16, 17):
            root = "_sqrt" if o == 16 else "_cbrt"
            emit(f"    if not r{ak} > 0.0: raise _Violation({k})")
            emit(f"    {r} = {root}(r{ak}) ** {float(c[k])!r}")
        elif o == 5:
            emit(f"    if r{ak} < 0.0: raise _Violation({k})")
            emit(f"    {r} = _sqrt(r{ak})")
        elif o == 9:
            emit(f"    if not r{ak} > 0.0: raise _Violation({k})")
            emit(f"    {r} = _log(r{ak})")
        elif o in _CALLS:
            emit(f"    {r} = {_CALLS[o]}(r{ak})")
        else:
            raise ValueError(f"bad opcode {o}")
    emit("    return (" + "".join(f"r{int(i)}, " for i in roots) + ")")
    return "\n".join(lines)


def _cbrt(u):
    r = float(np.cbrt(u))
    return r - (r * r * r - u) / (3.0 * r * r)


def _safe_exp(u):
    try:
        return math.exp(u)
    except OverflowError:
        return math.inf


class Runner:
    def __init__(self, op, a, b, c, roots):
        self.roots = [int(i) for i in roots]
        src = _generate(op, a, b, c, roots)
        ns = {
            "_Violation": _Violation, "_sqrt": math.sqrt, "_log": math.log,
            "_cbrt": _cbrt, "_sin": math.sin, "_cos": math.cos, "_exp": _safe_exp,
        }
        exec(compile(src, "<finslerlab-tape>", "exec"), ns)
        self._point = ns["_point"]

    def __call__(self, X, Y, P, out, status, bad):
        point = self._point
        p = [float(v) for v in P]
        isfinite = math.isfinite
        for i in range(len(X)):
            try:
                vals = point(X[i].tolist(), Y[i].tolist(), p)
            except _Violation as exc:
                status[i] = 1
                bad[i] = exc.k
                continue
            except OverflowError:
                status[i] = 2
                bad[i] = -1
                continue
            st, where = 0, -1
            for j, v in enumerate(vals):
                if not isfinite(v):
                    st, where = 2, self.roots[j]
                    break
            out[i, :] = vals
            status[i] = st
            bad[i] = where
