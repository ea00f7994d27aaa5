"""The metric-definition language: tokenizer, Pratt parser, serializer.

A metric file looks like::

    # conic Randers lift
    label = "conic"
    dim = 3
    param eps = 0.5
    energy = (y3^2 + x3^2*(sqrt(y1^2+x1^2*y2^2)+eps*y2)^2)/2
    domain = y1^2 + y2^2 > 0

``energy`` is E = F^2/2, so the fundamental tensor is its plain y-Hessian.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, DSLSyntaxError, UnknownIdentifier
from .expr import (
    UNARY_FUNCS, Expr, add, const, div, func, mul, neg, param, param_names,
    power, sub, to_source, variables, xvar, yvar,
)
from .tape import compile_tape

__all__ = [
    "MetricSpec", "Bindings", "Compare", "BoolOp", "parse_metric", "parse_expr",
    "parse_domain", "metric_source", "domain_source", "evaluate", "domain_holds",
]

RELOPS = (">=", "<=", "!=", ">", "<")

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op>>=|<=|!=|[-+*/^()<>=,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    out.append(Token("eof", "", len(text) + 1))
    return out


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    items: tuple


class _Parser:
    """Pratt parser over one statement's tokens."""

    def __init__(self, tokens, line, dim=None, params=(), free=False):
        self.toks = tokens
        self.i = 0
        self.line = line
        self.dim = dim
        self.params = set(params)
        self.free = free

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return DSLSyntaxError(msg, self.line, tok.col)

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise DSLSyntaxError(f"expected {text!r}, found {t.text or 'end of line'!r}",
                                 self.line, t.col)
        return t

    # arithmetic ----------------------------------------------------------
    _LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}

    def expr(self, rbp=0) -> Expr:
        left = self.nud(self.next())
        while True:
            t = self.peek()
            lbp = self._LBP.get(t.text, 0) if t.kind == "op" else 0
            if lbp <= rbp:
                return left
            self.next()
            left = self.led(t, left)

    def nud(self, t: Token) -> Expr:
        if t.kind == "number":
            txt = t.text
            if re.fullmatch(r"\d+", txt):
                return const(int(txt))
            return const(float(txt))
        if t.kind == "ident":
            return self.identifier(t)
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "-":
            return neg(self.expr(30))
        if t.text == "+":
            return self.expr(30)
        raise DSLSyntaxError(f"unexpected {t.text or 'end of line'!r}", self.line, t.col)

    def led(self, t: Token, left: Expr) -> Expr:
        op = t.text
        if op == "^":
            rhs_tok = self.peek()
            rhs = self.expr(39)  # right-associative
            if rhs.op != "const":
                raise DSLSyntaxError("exponent must be a constant expression",
                                     self.line, rhs_tok.col)
            try:
                return power(left, rhs)
            except ValueError as exc:
                raise DSLSyntaxError(str(exc), self.line, t.col) from None
        rhs = self.expr(self._LBP[op])
        try:
            return {"+": add, "-": sub, "*": mul, "/": div}[op](left, rhs)
        except ValueError as exc:
            raise DSLSyntaxError(str(exc), self.line, t.col) from None

    def identifier(self, t: Token) -> Expr:
        name = t.text
        if name in UNARY_FUNCS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            try:
                return func(name, arg)
            except ValueError as exc:
                raise DSLSyntaxError(str(exc), self.line, t.col) from None
        m = re.fullmatch(r"([xy])([1-9]\d*)", name)
        if m:
            k = int(m.group(2))
            if self.dim is not None and k > self.dim:
                raise DimensionMismatch(
                    f"unknown variable {name}: index exceeds dim={self.dim} "
                    f"(line {self.line}, column {t.col})")
            return (xvar if m.group(1) == "x" else yvar)(k - 1)
        if name in self.params or self.free:
            return param(name)
        raise UnknownIdentifier(f"unknown identifier {name!r} (line {self.line}, column {t.col})")

    # booleans --------------------------------------------------------------
    def boolexpr(self):
        items = [self.bool_and()]
        while self.peek().text == "or":
            self.next()
            items.append(self.bool_and())
        return items[0] if len(items) == 1 else BoolOp("or", tuple(items))

    def bool_and(self):
        items = [self.bool_atom()]
        while self.peek().text == "and":
            self.next()
            items.append(self.bool_atom())
        return items[0] if len(items) == 1 else BoolOp("and", tuple(items))

    def bool_atom(self):
        if self.peek().text == "(":
            save = self.i
            try:
                self.next()
                inner = self.boolexpr()
                self.expect(")")
                if self.peek().text not in ("and", "or", ")", ""):
                    raise DSLSyntaxError("not a boolean group")
                return inner
            except DSLSyntaxError:
                self.i = save
        left = self.expr()
        t = self.next()
        if t.text not in RELOPS:
            raise DSLSyntaxError(f"expected a comparison operator, found {t.text or 'end of line'!r}",
                                 self.line, t.col)
        return Compare(t.text, left, self.expr())

    def finish(self):
        t = self.peek()
        if t.kind != "eof":
            raise DSLSyntaxError(f"unexpected trailing {t.text!r}", self.line, t.col)


@dataclass(frozen=True, eq=True)
class MetricSpec:
    """A metric given by its energy E = F^2/2 in n dimensions."""

    dim: int
    energy: Expr
    params: Mapping[str, float] = field(default_factory=dict)
    domain: Compare | BoolOp | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(
            {k: float(v) for k, v in sorted(dict(self.params).items())}))
        if self.dim < 1:
            raise DimensionMismatch("dim must be a positive integer")
        for kind, i in variables(self.energy) | _domain_vars(self.domain):
            if i >= self.dim:
                raise DimensionMismatch(f"unknown variable {kind}{i + 1}: index exceeds dim={self.dim}")
        unresolved = (param_names(self.energy) | _domain_params(self.domain)) - set(self.params)
        if unresolved:
            raise UnknownIdentifier(f"unresolved parameter(s): {', '.join(sorted(unresolved))}")

    def __hash__(self):
        return hash((self.dim, self.energy, tuple(self.params.items()), self.domain, self.label))

    def with_params(self, **overrides) -> "MetricSpec":
        unknown = set(overrides) - set(self.params)
        if unknown:
            raise UnknownIdentifier(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return MetricSpec(self.dim, self.energy, {**self.params, **overrides}, self.domain, self.label)

    def to_source(self) -> str:
        return metric_source(self)


def _domain_nodes(d):
    if d is None:
        return []
    if isinstance(d, Compare):
        return [d.left, d.right]
    return [e for item in d.items for e in _domain_nodes(item)]


def _domain_vars(d):
    out = set()
    for e in _domain_nodes(d):
        out |= variables(e)
    return out


def _domain_params(d):
    out = set()
    for e in _domain_nodes(d):
        out |= param_names(e)
    return out


@dataclass(frozen=True)
class Bindings:
    x: tuple
    y: tuple
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))


def _statements(source: str):
    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0] if '"' not in raw else _strip_comment(raw)
        if text.strip():
            yield lineno, text


def _strip_comment(raw: str) -> str:
    in_str = False
    for k, ch in enumerate(raw):
        if ch == '"' and (k == 0 or raw[k - 1] != "\\"):
            in_str = not in_str
        elif ch == "#" and not in_str:
            return raw[:k]
    return raw


def parse_metric(source: str) -> MetricSpec:
    """Parse metric-definition text into a :class:`MetricSpec`."""
    dims, energies, domains, labels = [], [], [], []
    params: dict[str, float] = {}
    for lineno, text in _statements(source):
        toks = _tokenize(text, lineno)
        head = toks[0]
        if head.kind != "ident" or head.text not in ("dim", "energy", "param", "domain", "label"):
            raise DSLSyntaxError(f"unknown statement {head.text!r}", lineno, head.col)
        if head.text == "param":
            name = toks[1]
            if name.kind != "ident":
                raise DSLSyntaxError("expected a parameter name", lineno, name.col)
            if toks[2].text != "=":
                raise DSLSyntaxError("expected '='", lineno, toks[2].col)
            rest = toks[3:]
            sign = 1.0
            if rest[0].text in ("-", "+"):
                sign = -1.0 if rest[0].text == "-" else 1.0
                rest = rest[1:]
            if rest[0].kind != "number" or rest[1].kind != "eof":
                raise DSLSyntaxError("parameter value must be a number", lineno, rest[0].col)
            if name.text in params:
                raise DSLSyntaxError(f"duplicate parameter {name.text!r}", lineno, name.col)
            if re.fullmatch(r"[xy][1-9]\d*", name.text) or name.text in UNARY_FUNCS or name.text in ("and", "or"):
                raise DSLSyntaxError(f"reserved name {name.text!r}", lineno, name.col)
            params[name.text] = sign * float(rest[0].text)
            continue
        if toks[1].text != "=":
            raise DSLSyntaxError("expected '='", lineno, toks[1].col)
        body = toks[2:]
        if head.text == "dim":
            if body[0].kind != "number" or not body[0].text.isdigit() or body[1].kind != "eof":
                raise DSLSyntaxError("dim must be a positive integer", lineno, body[0].col)
            dims.append((lineno, int(body[0].text)))
        elif head.text == "label":
            if body[0].kind != "string" or body[1].kind != "eof":
                raise DSLSyntaxError("label must be a double-quoted string", lineno, body[0].col)
            labels.append(json.loads(body[0].text))
        elif head.text == "energy":
            energies.append((lineno, body))
        else:
            domains.append((lineno, body))
    if len(dims) != 1:
        raise DSLSyntaxError(f"exactly one 'dim' statement required, found {len(dims)}")
    if len(energies) != 1:
        raise DSLSyntaxError(f"exactly one 'energy' statement required, found {len(energies)}")
    if len(domains) > 1 or len(labels) > 1:
        raise DSLSyntaxError("at most one 'domain' and one 'label' statement allowed")
    dim = dims[0][1]
    if dim < 1:
        raise DSLSyntaxError("dim must be positive", dims[0][0], 1)
    lineno, body = energies[0]
    p = _Parser(body, lineno, dim, params)
    energy = p.expr()
    p.finish()
    domain = None
    if domains:
        lineno, body = domains[0]
        p = _Parser(body, lineno, dim, params)
        domain = p.boolexpr()
        p.finish()
    return MetricSpec(dim, energy, params, domain, labels[0] if labels else "")


def parse_expr(text: str, dim: int | None = None, params: Sequence[str] = (), free: bool = False) -> Expr:
    """Parse a single arithmetic expression.

    With ``free=True`` any non-variable identifier becomes a parameter node.
    """
    p = _Parser(_tokenize(text, 1), 1, dim, params, free)
    e = p.expr()
    p.finish()
    return e


def parse_domain(text: str, dim: int | None = None, params: Sequence[str] = (), free: bool = False):
    p = _Parser(_tokenize(text, 1), 1, dim, params, free)
    d = p.boolexpr()
    p.finish()
    return d


def domain_source(d) -> str:
    if isinstance(d, Compare):
        return f"{to_source(d.left)} {d.op} {to_source(d.right)}"
    parts = []
    for item in d.items:
        s = domain_source(item)
        if isinstance(item, BoolOp):
            s = f"({s})"
        parts.append(s)
    return f" {d.op} ".join(parts)


def metric_source(spec: MetricSpec) -> str:
    lines = []
    if spec.label:
        lines.append(f"label = {json.dumps(spec.label)}")
    lines.append(f"dim = {spec.dim}")
    for name, value in spec.params.items():
        lines.append(f"param {name} = {value!r}")
    lines.append(f"energy = {to_source(spec.energy)}")
    if spec.domain is not None:
        lines.append(f"domain = {domain_source(spec.domain)}")
    return "\n".join(lines) + "\n"


def evaluate(e: Expr, b: Bindings) -> float:
    """Evaluate ``e`` at ``b`` in double precision.

    Raises :class:`~finslerlab.errors.DomainViolation` naming the offending
    subexpression, or :class:`~finslerlab.errors.NonFiniteResult`.
    """
    tape = compile_tape((e,))
    return float(tape(b.x, b.y, b.params)[0])


_CMP = {
    ">": np.greater, ">=": np.greater_equal, "<": np.less,
    "<=": np.less_equal, "!=": np.not_equal,
}


def _domain_eval(d, values, index):
    if isinstance(d, Compare):
        return bool(_CMP[d.op](values[index[d.left]], values[index[d.right]]))
    results = (_domain_eval(item, values, index) for item in d.items)
    return all(results) if d.op == "and" else any(results)


def domain_holds(spec: MetricSpec, x, y) -> bool:
    """Whether the domain predicate holds; evaluation failures count as outside."""
    if spec.domain is None:
        return True
    nodes = tuple(dict.fromkeys(_domain_nodes(spec.domain)))
    tape = compile_tape(nodes)
    out, status, _ = tape.run(np.asarray(x, float).reshape(1, -1),
                              np.asarray(y, float).reshape(1, -1), spec.params, threads=1)
    if status[0]:
        return False
    index = {n: k for k, n in enumerate(nodes)}
    return _domain_eval(spec.domain, out[0], index)
