"""Immutable expression trees over x-, y-variables and named parameters.

Nodes are hash-consed: structurally identical trees are the same Python
object, so equality is identity and shared subtrees cost nothing.  All
constructors below apply constant folding and the 0/1 identities.
"""
from __future__ import annotations

import math
import threading
from fractions import Fraction
from numbers import Real

__all__ = [
    "Expr", "const", "xvar", "yvar", "param", "neg", "add", "sub", "mul",
    "div", "power", "func", "is_const", "const_value", "variables",
    "param_names", "substitute", "to_source", "UNARY_FUNCS", "ZERO", "ONE",
]

UNARY_FUNCS = ("sqrt", "sin", "cos", "exp", "log")

_intern: dict = {}
_intern_lock = threading.Lock()


class Expr:
    """A node of a scalar expression tree.

    ``op`` is one of ``const``, ``x``, ``y``, ``param``, ``neg``, the names in
    :data:`UNARY_FUNCS`, ``add``, ``sub``, ``mul``, ``div`` or ``pow``.
    ``value`` holds the constant (``Fraction`` or ``float``), the 0-based
    variable index, the parameter name, or the constant exponent of ``pow``.
    """

    __slots__ = ("op", "args", "value", "__weakref__")

    def __new__(cls, op, args=(), value=None):
        key = (op, args, type(value).__name__, value)
        node = _intern.get(key)
        if node is not None:
            return node
        with _intern_lock:
            node = _intern.get(key)
            if node is None:
                node = object.__new__(cls)
                object.__setattr__(node, "op", op)
                object.__setattr__(node, "args", args)
                object.__setattr__(node, "value", value)
                _intern[key] = node
        return node

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __reduce__(self):
        return (Expr, (self.op, self.args, self.value))

    def __repr__(self):
        return f"Expr({to_source(self)!r})"

    def __str__(self):
        return to_source(self)

    # operator sugar, used heavily by the catalog and the tests
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)


def _lift(v):
    if isinstance(v, Expr):
        return v
    return const(v)


def _norm_number(v):
    if isinstance(v, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, Real):
        return float(v)
    raise TypeError(f"not a real number: {v!r}")


def const(v) -> Expr:
    v = _norm_number(v)
    if isinstance(v, float) and v == 0.0:
        v = Fraction(0)
    return Expr("const", (), v)


ZERO = const(0)
ONE = const(1)
_MINUS_ONE = const(-1)


def xvar(i: int) -> Expr:
    return Expr("x", (), int(i))


def yvar(i: int) -> Expr:
    return Expr("y", (), int(i))


def param(name: str) -> Expr:
    return Expr("param", (), str(name))


def is_const(e: Expr) -> bool:
    return e.op == "const"


def const_value(e: Expr):
    return e.value if e.op == "const" else None


def _is(e, v):
    return e.op == "const" and e.value == v


def _fold(v):
    # Fractions stay exact, anything touching a float becomes a float
    if isinstance(v, float) and not math.isfinite(v):
        raise ValueError("constant folding produced a non-finite value")
    return const(v)


def neg(a: Expr) -> Expr:
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def add(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return _fold(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if b.op == "neg":
        return sub(a, b.args[0])
    if a.op == "neg":
        return sub(b, a.args[0])
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return _fold(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if a is b:
        return ZERO
    if b.op == "neg":
        return add(a, b.args[0])
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.op == "const" and b.op == "const":
        return _fold(a.value * b.value)
    if b.op == "const":
        a, b = b, a
    if a.op == "const":
        if a.value == 0:
            return ZERO
        if a.value == 1:
            return b
        if a.value == -1:
            return neg(b)
        if b.op == "mul" and b.args[0].op == "const":
            return mul(_fold(a.value * b.args[0].value), b.args[1])
        if b.op == "neg":
            return mul(const(-a.value), b.args[0])
    if a.op == "neg" and b.op == "neg":
        return mul(a.args[0], b.args[0])
    if a.op == "neg":
        return neg(mul(a.args[0], b))
    if b.op == "neg":
        return neg(mul(a, b.args[0]))
    if a is b:
        return power(a, 2)
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if b.op == "const":
        if b.value == 0:
            return Expr("div", (a, b))
        if a.op == "const":
            return _fold(a.value / b.value)
        if b.value == 1:
            return a
        if b.value == -1:
            return neg(a)
    if _is(a, 0):
        return ZERO
    if a is b:
        return ONE
    if a.op == "neg":
        return neg(div(a.args[0], b))
    return Expr("div", (a, b))


def _exponent(p):
    if isinstance(p, Expr):
        if p.op != "const":
            raise ValueError("exponent must be a constant expression")
        p = p.value
    p = _norm_number(p)
    if isinstance(p, float):
        fr = Fraction(p)
        # exactly representable short rationals (2.5, 0.25) are kept exact
        if fr.denominator <= 1024:
            p = fr
    return p


def _is_integer(p) -> bool:
    return isinstance(p, Fraction) and p.denominator == 1


def power(a: Expr, p) -> Expr:
    p = _exponent(p)
    if p == 0:
        return ONE
    if p == 1:
        return a
    if a.op == "const":
        base = a.value
        if _is_integer(p):
            if base == 0 and p < 0:
                return Expr("pow", (a,), p)
            return _fold(base ** int(p)) if isinstance(base, Fraction) else _fold(float(base) ** int(p))
        if base > 0:
            r = float(base) ** float(p)
            return _fold(r)
        return Expr("pow", (a,), p)
    if a.op == "pow" and _is_integer(p):
        return power(a.args[0], a.value * p)
    return Expr("pow", (a,), p)


def func(name: str, a: Expr) -> Expr:
    if name not in UNARY_FUNCS:
        raise ValueError(f"unknown function {name!r}")
    if a.op == "const":
        v = a.value
        if name == "sqrt" and v >= 0:
            if isinstance(v, Fraction):
                n, d = math.isqrt(v.numerator), math.isqrt(v.denominator)
                if n * n == v.numerator and d * d == v.denominator:
                    return const(Fraction(n, d))
            return _fold(math.sqrt(v))
        if name == "exp" and v == 0:
            return ONE
        if name == "log" and v == 1:
            return ZERO
        if name in ("sin",) and v == 0:
            return ZERO
        if name == "cos" and v == 0:
            return ONE
        if name == "log" and v > 0:
            return _fold(math.log(v))
        if name in ("sin", "cos", "exp"):
            try:
                return _fold(getattr(math, name)(v))
            except OverflowError:
                pass
    return Expr(name, (a,))


# -- traversal helpers ---------------------------------------------------

def _postorder(roots):
    seen = set()
    order = []
    stack = [(r, False) for r in reversed(list(roots))]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for c in reversed(node.args):
            if id(c) not in seen:
                stack.append((c, False))
    return order


def variables(e: Expr) -> set:
    """Set of ``('x', i)`` / ``('y', i)`` pairs appearing in ``e``."""
    return {(n.op, n.value) for n in _postorder([e]) if n.op in ("x", "y")}


def param_names(e: Expr) -> set:
    return {n.value for n in _postorder([e]) if n.op == "param"}


def rebuild(node: Expr, args) -> Expr:
    op = node.op
    if op == "neg":
        return neg(args[0])
    if op == "add":
        return add(*args)
    if op == "sub":
        return sub(*args)
    if op == "mul":
        return mul(*args)
    if op == "div":
        return div(*args)
    if op == "pow":
        return power(args[0], node.value)
    if op in UNARY_FUNCS:
        return func(op, args[0])
    return node


def substitute(e: Expr, mapping: dict) -> Expr:
    """Replace parameters (by name) or variable nodes by expressions.

    Keys are parameter names or ``Expr`` variable nodes.
    """
    memo = {}
    for node in _postorder([e]):
        if node.op == "param" and node.value in mapping:
            memo[node] = _lift(mapping[node.value])
        elif node in mapping:
            memo[node] = _lift(mapping[node])
        elif node.args:
            memo[node] = rebuild(node, [memo[c] for c in node.args])
        else:
            memo[node] = node
    return memo[e]


# -- serialization ---------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _num_source(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator) if v >= 0 else f"(-{-v.numerator})"
        return f"({v.numerator}/{v.denominator})"
    s = repr(float(v))
    if s.startswith("-"):
        return f"({s})"
    return s


def to_source(e: Expr) -> str:
    """Render ``e`` in the metric DSL; re-parsing gives back the same node."""
    text = {}
    prec = {}
    for node in _postorder([e]):
        op = node.op
        if op == "const":
            s, p = _num_source(node.value), 9
        elif op == "x":
            s, p = f"x{node.value + 1}", 9
        elif op == "y":
            s, p = f"y{node.value + 1}", 9
        elif op == "param":
            s, p = node.value, 9
        elif op in UNARY_FUNCS:
            s, p = f"{op}({text[node.args[0]]})", 9
        elif op == "neg":
            a = node.args[0]
            inner = text[a] if prec[a] > _PREC["neg"] else f"({text[a]})"
            s, p = f"-{inner}", _PREC["neg"]
        elif op == "pow":
            a = node.args[0]
            base = text[a] if prec[a] > _PREC["pow"] else f"({text[a]})"
            s, p = f"{base}^{_num_source(node.value)}", _PREC["pow"]
        else:
            a, b = node.args
            mine = _PREC[op]
            left = text[a] if prec[a] >= mine else f"({text[a]})"
            # left-associative: the right operand needs strictly higher binding
            right = text[b] if prec[b] > mine else f"({text[b]})"
            sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
            s, p = f"{left}{sym}{right}", mine
        text[node] = s
        prec[node] = p
    return text[e]
