"""Exact partial derivatives of expression trees."""
from __future__ import annotations

import threading
from fractions import Fraction

from .expr import (
    ONE, ZERO, Expr, add, const, div, func, mul, neg, power, sub, xvar, yvar,
)

__all__ = ["differentiate", "partial"]

_cache: dict = {}
_cache_lock = threading.Lock()


def _local(node: Expr, dargs, var: Expr) -> Expr:
    op = node.op
    if op == "const" or op == "param":
        return ZERO
    if op in ("x", "y"):
        return ONE if node is var else ZERO
    if op == "neg":
        return neg(dargs[0])
    if op == "add":
        return add(dargs[0], dargs[1])
    if op == "sub":
        return sub(dargs[0], dargs[1])
    a = node.args[0]
    da = dargs[0]
    if op == "mul":
        b = node.args[1]
        db = dargs[1]
        return add(mul(da, b), mul(a, db))
    if op == "div":
        b = node.args[1]
        db = dargs[1]
        if db is ZERO:
            return div(da, b)
        # (a'b - ab') / b^2
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if da is ZERO:
        return ZERO
    if op == "pow":
        p = node.value
        p1 = p - 1 if isinstance(p, Fraction) else p - 1.0
        return mul(mul(const(p), power(a, p1)), da)
    if op == "sqrt":
        return div(da, mul(const(2), node))
    if op == "sin":
        return mul(func("cos", a), da)
    if op == "cos":
        return neg(mul(func("sin", a), da))
    if op == "exp":
        return mul(node, da)
    if op == "log":
        return div(da, a)
    raise ValueError(f"cannot differentiate node {op!r}")


def differentiate(e: Expr, v: Expr) -> Expr:
    """Partial derivative of ``e`` with respect to the variable node ``v``.

    Results are memoized per ``(node, variable)``; the memo table only ever
    grows and is guarded by a lock, so concurrent callers are safe.
    """
    if v.op not in ("x", "y"):
        raise ValueError("can only differentiate with respect to x- or y-variables")
    hit = _cache.get((e, v))
    if hit is not None:
        return hit
    done = {}
    stack = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if node in done:
            continue
        if not expanded:
            got = _cache.get((node, v))
            if got is not None:
                done[node] = got
                continue
            stack.append((node, True))
            stack.extend((c, False) for c in node.args if c not in done)
        else:
            done[node] = _local(node, [done[c] for c in node.args], v)
    with _cache_lock:
        for node, d in done.items():
            _cache.setdefault((node, v), d)
    return done[e]


def partial(e: Expr, *vars_: tuple) -> Expr:
    """Mixed partial; each item of ``vars_`` is ``('x', i)``, ``('y', i)`` or a node."""
    for v in vars_:
        if not isinstance(v, Expr):
            kind, i = v
            v = xvar(i) if kind == "x" else yvar(i)
        e = differentiate(e, v)
    return e
