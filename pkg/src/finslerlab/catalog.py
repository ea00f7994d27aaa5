"""Built-in metrics with their expected closed-form components.

Energies here follow the package convention E = F^2/2, so a closed form for
the squared line element appears halved.  Expected components are stored as
DSL text and parsed with the metric's parameters; entries whose printed form
contains a misprint keep the verbatim text in ``printed`` next to the
corrected expression used for regression.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .dsl import Bindings, MetricSpec, domain_source, parse_domain, parse_expr
from .errors import FinslerLabError, UnknownIdentifier
from .expr import Expr, const, param_names, substitute, to_source
from .sampling import sample_points
from .scfield import VectorFieldSpec, check_condition, sc_detect
from .tape import compile_tape
from .tensors import fundamental_bundle, leading_minors

__all__ = [
    "ExpectedArtifacts", "ExpectedField", "GeneralForm4DParams", "VerificationReport",
    "builtin", "names", "tachibana_lift", "general_form_4d", "verify_example", "DEFAULTS",
]


@dataclass(frozen=True)
class ExpectedField:
    field: VectorFieldSpec
    condition: str        # SC, C, F or CC
    should_pass: bool = True
    note: str = ""


@dataclass(frozen=True)
class ExpectedArtifacts:
    """Closed forms to regress against; indices are 0-based tuples."""

    g: tuple = ()
    C: tuple = ()
    C_complete: bool = False          # every unlisted C_ijk vanishes
    minors: tuple = ()
    fields: tuple = ()
    sc_direction: VectorFieldSpec | None = None
    sc_dimension: int | None = None
    printed: Mapping = field(default_factory=dict)   # name -> verbatim Expr
    obstructions: Mapping = field(default_factory=dict)
    riemannian: bool | None = None
    notes: tuple = ()

    def component(self, name: str) -> Expr:
        kind, idx = _split_name(name)
        for i, e in (self.g if kind == "g" else self.C if kind == "C" else ()):
            if i == idx:
                return e
        if kind == "minor" and 1 <= idx[0] <= len(self.minors):
            return self.minors[idx[0] - 1]
        raise KeyError(name)

    def printed_component(self, name: str) -> Expr:
        """As typeset in the source, misprints included."""
        return self.printed.get(name) or self.component(name)


def _split_name(name: str):
    if name.startswith("minor"):
        return "minor", (int(name[5:]),)
    return name[0], tuple(int(ch) - 1 for ch in name[1:])


def component_name(kind: str, idx) -> str:
    return kind + "".join(str(i + 1) for i in idx)


DEFAULTS = {
    "euclidean_n": {"n": 3},
    "product3d": {"f": 1.0},
    "conic_randers_lift": {"eps": 0.5},
    "randers2d": {"eps": 0.5},
    "ex5_1": {"A5": 1.0, "A6": 2.0, "F5": 1.0, "F6": 0.0, "F7": 1.0, "F8": 1.0},
    "ex5_2": {"A6": 2.0, "F5": 1.0, "F6": 0.0, "F7": 1.0, "F8": 1.0},
    "ex5_3": {"A5": 1.0, "A6": 2.0, "F1": "x1", "F5": 1.0, "F6": 0.0, "F7": 1.0, "F8": 1.0},
}

DESCRIPTIONS = {
    "euclidean_n": "flat metric E = |y|^2/2 in n dimensions (override n)",
    "product3d": "F^2 = f (y1 y2 y3)^(2/3): pseudo-Finsler, C_i = 0 but C != 0",
    "conic_randers_lift": "Tachibana lift of a 2-D Randers metric; conic, concurrent field",
    "randers2d": "F = sqrt(y1^2 + x1^2 y2^2) + eps y2 on |x1| > eps",
    "ex5_1": "general 4-D form, quadratic (Riemannian) specialization",
    "ex5_2": "general 4-D form with F3(x,u) = u^4; conic on y1 != 0",
    "ex5_3": "general 4-D form with F2(u) = u^2, F3(x,u) = u; conic on y1 != 0",
}


def names() -> list[str]:
    return sorted(DEFAULTS)


def _expr(text: str, dim: int, spec_params) -> Expr:
    return parse_expr(text, dim, tuple(spec_params))


def _table(entries, dim, params):
    return tuple((_split_name(k)[1], _expr(v, dim, params)) for k, v in entries)


# -- constructors ------------------------------------------------------------

def _euclidean(n: int):
    if n < 1:
        raise FinslerLabError("euclidean_n needs n >= 1")
    energy = parse_expr("(" + "+".join(f"y{i}^2" for i in range(1, n + 1)) + ")/2", n)
    spec = MetricSpec(n, energy, {}, None, f"euclidean_{n}")
    fields = [ExpectedField(VectorFieldSpec.parse(";".join("1" if j == i else "0" for j in range(n)), n),
                            "SC") for i in range(n)]
    fields.append(ExpectedField(VectorFieldSpec.parse(";".join(f"-x{i}" for i in range(1, n + 1)), n,
                                                      kind="concurrent"), "C"))
    g = tuple(((i, j), const(1 if i == j else 0)) for i in range(n) for j in range(i, n))
    return spec, ExpectedArtifacts(g=g, C=(), C_complete=True, fields=tuple(fields),
                                   sc_dimension=n, riemannian=True,
                                   minors=tuple(const(1) for _ in range(n)))


def _product3d(f: float):
    params = {"f": f}
    spec = MetricSpec(3, parse_expr("f*(y1*y2*y3)^(2/3)/2", 3, params), params,
                      parse_domain("y1*y2*y3 > 0", 3, params), "product3d")
    P = "(y1*y2*y3)"
    g = [("g11", f"-(1/9)*f*(y2*y3)^2/{P}^(4/3)"), ("g12", f"(2/9)*f*y1*y2*y3^2/{P}^(4/3)"),
         ("g13", f"(2/9)*f*y1*y2^2*y3/{P}^(4/3)"), ("g22", f"-(1/9)*f*(y1*y3)^2/{P}^(4/3)"),
         ("g23", f"(2/9)*f*y1^2*y2*y3/{P}^(4/3)"), ("g33", f"-(1/9)*f*(y1*y2)^2/{P}^(4/3)")]
    C = [("C111", f"(2/27)*f*(y2*y3)^3/{P}^(7/3)"), ("C112", f"-(1/27)*f*y1*y2^2*y3^3/{P}^(7/3)"),
         ("C113", f"-(1/27)*f*y1*y2^3*y3^2/{P}^(7/3)"), ("C122", f"-(1/27)*f*y1^2*y2*y3^3/{P}^(7/3)"),
         ("C123", f"(2/27)*f*(y2*y3)^2*y1^2/{P}^(7/3)"),
         ("C133", f"-(1/27)*f*y1^2*y2^3*y3/{P}^(7/3)"), ("C222", f"(2/27)*f*(y1*y3)^3/{P}^(7/3)"),
         ("C223", f"-(1/27)*f*y1^3*y2*y3^2/{P}^(7/3)"), ("C233", f"-(1/27)*f*y1^3*y2^2*y3/{P}^(7/3)"),
         ("C333", f"(2/27)*f*(y1*y2)^3/{P}^(7/3)")]
    printed = {"C123": _expr(f"(2/27)*f*(y2*y3)^2*y1^3/{P}^(7/3)", 3, params)}
    obstruction = parse_expr(f"(1/27)*f*(2*B1*y2*y3 - B2*y1*y3 - B3*y1*y2)/(y1^2*{P}^(1/3))", 3,
                             ("f", "B1", "B2", "B3"))
    notes = ("printed C123 carries y1^3 where the derivative gives y1^2; the two agree only at y1 = 1",
             "C_i = 0 identically although C does not vanish; g is indefinite")
    return spec, ExpectedArtifacts(
        g=_table(g, 3, params), C=_table(C, 3, params), C_complete=True, sc_dimension=0,
        printed=MappingProxyType(printed), obstructions=MappingProxyType({"BC11": obstruction}),
        riemannian=False, notes=notes)


def tachibana_lift(H_spec: MetricSpec, label: str | None = None) -> tuple[MetricSpec, ExpectedArtifacts]:
    """E = y_n^2/2 + x_n^2 E_H(x', y') on n = dim H + 1 coordinates."""
    m = H_spec.dim
    n = m + 1
    energy = parse_expr(f"y{n}^2/2", n) + parse_expr(f"x{n}^2", n) * H_spec.energy
    spec = MetricSpec(n, energy, dict(H_spec.params), H_spec.domain,
                      label if label is not None else f"tachibana({H_spec.label})")
    zeros = ["0"] * m
    f_dir = VectorFieldSpec.parse(";".join(zeros + ["f"]), n, params={"f": 1.0})
    fields = (
        ExpectedField(f_dir, "SC"),
        ExpectedField(VectorFieldSpec.parse(";".join(zeros + [f"-x{n}"]), n, kind="concurrent"), "C",
                      True, "sign (0,...,0,-x_n) gives B^i_{|j} = -delta^i_j"),
        ExpectedField(VectorFieldSpec.parse(";".join(zeros + [f"x{n}"]), n, kind="concurrent"), "C",
                      False, "sign as stated for the conic instance; gives +delta"),
        ExpectedField(VectorFieldSpec.parse("", n, kind="gradient", potential=f"x{n}"), "F"),
        ExpectedField(VectorFieldSpec.parse("", n, kind="conformal", potential=f"x{n}"), "CC"),
    )
    return spec, ExpectedArtifacts(fields=fields, sc_direction=f_dir)


def _randers_energy(params):
    return parse_expr("(sqrt(y1^2+x1^2*y2^2)+eps*y2)^2/2", 2, params)


def _conic(eps: float):
    params = {"eps": eps}
    H = MetricSpec(2, _randers_energy(params), params, parse_domain("y1^2 + y2^2 > 0", 2, params),
                   "randers_factor")
    spec, lifted = tachibana_lift(H, "conic_randers_lift")
    S = "(y1^2+x1^2*y2^2)"
    g = [("g11", f"x3^2*(eps*x1^4*y2^5 + eps*x1^2*y1^2*y2^3 + sqrt({S})*(x1^2*y2^2*{S} "
                 f"- x1^2*y1^2*y2^2 + 2*y1^2*{S} - y1^4))/{S}^(5/2)"),
         ("g22", f"x3^2*(2*eps*x1^4*y2^3 + 3*eps*x1^2*y1^2*y2 + x1^2*{S}^(3/2) "
                 f"+ eps^2*{S}^(3/2))/{S}^(3/2)"),
         ("g12", f"eps*x3^2*y1^3/{S}^(3/2)"), ("g33", "1")]
    C = [("C111", f"-(3/2)*eps*x1^2*x3^2*y1*y2^3/{S}^(5/2)"),
         ("C112", f"(3/2)*eps*x1^2*x3^2*y1^2*y2^2/{S}^(5/2)"),
         ("C122", f"-(3/2)*eps*x1^2*x3^2*y1^3*y2/{S}^(5/2)"),
         ("C222", f"(3/2)*eps*x1^2*x3^2*y1^4/{S}^(5/2)")]
    notes = ("concurrent field stated as B3 = x3; under the spray convention used here "
             "(0,0,-x3) satisfies B^i_{|j} = -delta^i_j and (0,0,x3) gives +delta",
             "domain: y1^2 + y2^2 > 0 (the printed set-builder condition is inverted)")
    return spec, ExpectedArtifacts(
        g=_table(g, 3, params), C=_table(C, 3, params), C_complete=True, fields=lifted.fields,
        sc_direction=lifted.sc_direction, sc_dimension=1, riemannian=False, notes=notes)


def _randers2d(eps: float):
    params = {"eps": eps}
    spec = MetricSpec(2, _randers_energy(params), params,
                      parse_domain("x1^2 > eps^2 and y1^2 + y2^2 > 0", 2, params), "randers2d")
    return spec, ExpectedArtifacts(sc_dimension=0, riemannian=False,
                                   notes=("positive definite where |x1| > eps",))


# -- general 4-D form ----------------------------------------------------------

@dataclass(frozen=True)
class GeneralForm4DParams:
    """Constants A1..A7 and shape functions F1..F8.

    ``F2`` is text in the variable ``u``; ``F3`` in ``u`` and x1..x4; the
    others are text in x1..x4 or numbers.  Constants named in ``free`` (and
    numeric F-slots) stay as overridable parameters; the rest are substituted.
    """

    A: Mapping[str, float] = field(default_factory=dict)
    F: Mapping[str, object] = field(default_factory=dict)
    free: tuple = ("A5", "A6")

    def value(self, name):
        if name.startswith("A"):
            return float(self.A.get(name, 0.0))
        return self.F.get(name, 0)


_GF_ENERGY = ("(y1*(F1*y2+y4)*F2 + F3*y1^2 - F4*(A5*y2^2+A6*y2*y3) + F5*y1^2 + F6*y1*y2"
              " + F7*y2^2 + F8*y4^2)/2")


def general_form_4d(p: GeneralForm4DParams, label: str = "general_form_4d",
                    domain: str | None = "y1 != 0") -> tuple[MetricSpec, ExpectedArtifacts]:
    """Metric from the four-dimensional family with its semi-concurrent field."""
    A5, A6 = p.value("A5"), p.value("A6")
    if A6 == 0 and A5 != 0:
        raise FinslerLabError("A6 = 0 with A5 != 0: the expected field needs -A5/A6")
    params: dict[str, float] = {}
    sub: dict[str, Expr] = {}
    for k in range(1, 8):
        name = f"A{k}"
        if name in p.free:
            params[name] = p.value(name)
        else:
            sub[name] = const(p.value(name))
    for k in (1, 4, 5, 6, 7, 8):
        name = f"F{k}"
        v = p.value(name)
        if isinstance(v, str):
            sub[name] = parse_expr(v, 4, tuple(params))
        else:
            params[name] = float(v)
    u1 = substitute(parse_expr("((A1*x1+A2*x2+A3*x3+A4*x4+A7)*y1 + A5*y2 + A6*y3)/y1", 4, free=True), sub)
    u2 = substitute(parse_expr("-(A5*y2+A6*y3)/y1", 4, free=True), sub)
    F2 = parse_expr(str(p.value("F2") or "0"), 4, tuple(params) + ("u",))
    F3 = parse_expr(str(p.value("F3") or "0"), 4, tuple(params) + ("u",))
    sub["F2"] = substitute(F2, {"u": u1})
    sub["F3"] = substitute(F3, {"u": u2})
    energy = substitute(parse_expr(_GF_ENERGY, 4, free=True), sub)
    dom = parse_domain(domain, 4) if domain else None
    spec = MetricSpec(4, energy, params, dom, label)
    F1 = p.value("F1")
    F1_text = F1 if isinstance(F1, str) else repr(float(F1))
    if A6 != 0:
        comps = f"0;f;-(A5/A6)*f;-f*({F1_text})"
    else:
        comps = "0;f;0;0"
    fparams = {"f": 1.0, **{k: v for k, v in (("A5", A5), ("A6", A6)) if k not in params}}
    direction = VectorFieldSpec.parse(comps, 4, params=fparams)
    return spec, ExpectedArtifacts(fields=(ExpectedField(direction, "SC"),), sc_direction=direction)


def _with_slots(base: dict, ov: dict):
    out = dict(base)
    out.update(ov)
    return out


EX5_ENERGIES = {
    1: "(y4*(A5*y2+A6*y3) + (A5*y2+A6*y3)^2 + F5*y1^2 + F6*y1*y2 + F7*y2^2 + F8*y4^2)/2",
    2: "(A6*y3*y4 + A6^4*y3^4/y1^2 + F5*y1^2 + F6*y1*y2 + F7*y2^2 + F8*y4^2)/2",
    3: "((F1*y2+y4)*(A5*y2+A6*y3)^2/y1 - (A5*y2+A6*y3)*y1 + F5*y1^2 + F6*y1*y2 + F7*y2^2"
       " + F8*y4^2)/2",
}

# substitutions turning the general 4-D form into each example
EX5_FORMS = {
    1: ({"F1": 0, "F4": 0, "F2": "u", "F3": "u^2"}, ("A5", "A6"), None),
    2: ({"F1": 0, "F4": 0, "F2": "u", "F3": "u^4"}, ("A6",), "y1 != 0"),
    3: ({"F4": 0, "F2": "u^2", "F3": "u"}, ("A5", "A6"), "y1 != 0"),
}


def ex5_general_params(which: int, **overrides) -> tuple[GeneralForm4DParams, str | None]:
    """The general-form parameters reproducing example ``which``."""
    d = _with_slots(DEFAULTS[f"ex5_{which}"], overrides)
    slots, free, domain = EX5_FORMS[which]
    A = {k: float(v) for k, v in d.items() if k.startswith("A")}
    if which == 2:
        A["A5"] = 0.0
    F = {k: v for k, v in d.items() if k.startswith("F")}
    F.update(slots)
    return GeneralForm4DParams(A, F, free=free), domain


def _ex5(which: int, ov: dict):
    d = _with_slots(DEFAULTS[f"ex5_{which}"], ov)
    if which == 3 and float(d["A6"]) == 0:
        raise FinslerLabError("ex5_3 needs A6 != 0")
    gp, domain = ex5_general_params(which, **ov)
    _, base = general_form_4d(gp, f"ex5_{which}", domain)
    F = {k: v for k, v in d.items() if k.startswith("F")}
    params = {k: float(v) for k, v in d.items() if not isinstance(v, str)}
    energy = parse_expr(EX5_ENERGIES[which], 4, tuple(params) + ("F1",))
    energy = substitute(energy, {"F1": _f1(F.get("F1", 0))})
    spec = MetricSpec(4, energy, params, parse_domain(domain, 4) if domain else None, f"ex5_{which}")
    pn = tuple(spec.params)
    F1 = F.get("F1", 0)
    F1t = f"({F1})" if isinstance(F1, str) else f"({float(F1)!r})"

    def tab(entries):
        return tuple((_split_name(k)[1], substitute(parse_expr(v, 4, pn + ("F1",)), {"F1": _f1(F1)}))
                     for k, v in entries)

    def one(text):
        return substitute(parse_expr(text, 4, pn + ("F1",)), {"F1": _f1(F1)})

    printed, notes, minors = {}, [], ()
    if which == 1:
        g = [("g11", "F5"), ("g12", "F6/2"), ("g13", "0"), ("g14", "0"), ("g22", "A5^2+F7"),
             ("g23", "A5*A6"), ("g24", "A5/2"), ("g33", "A6^2"), ("g34", "A6/2"), ("g44", "F8")]
        C = []
        minors = ("F5", "A5^2*F5+F5*F7-F6^2/4", "(A6^2/4)*(4*F5*F7-F6^2)",
                  "(A6^2/16)*(4*F5*F7-F6^2)*(4*F8-1)")
        riem, scdim = True, 4
    elif which == 2:
        g = [("g11", "(3*A6^4*y3^4+F5*y1^4)/y1^4"), ("g12", "F6/2"), ("g13", "-4*A6^4*y3^3/y1^3"),
             ("g14", "0"), ("g22", "F7"), ("g23", "0"), ("g24", "0"),
             ("g33", "6*A6^4*y3^2/y1^2"), ("g34", "A6/2"), ("g44", "F8")]
        C = [("C111", "-6*A6^4*y3^4/y1^5"), ("C113", "6*A6^4*y3^3/y1^4"),
             ("C133", "-6*A6^4*y3^2/y1^3"), ("C333", "6*A6^4*y3/y1^2")]
        minors = ("(3*A6^4*y3^4+F5*y1^4)/y1^4",
                  "(12*A6^4*F7*y3^4+4*F5*F7*y1^4-F6^2*y1^4)/(4*y1^4)",
                  "A6^4*y3^2*(4*A6^4*F7*y3^4+12*F5*F7*y1^4-3*F6^2*y1^4)/(2*y1^6)",
                  "-A6^2*(-32*A6^6*F7*F8*y3^6+12*A6^4*F7*y1^2*y3^4-96*A6^2*F5*F7*F8*y1^4*y3^2"
                  "+24*A6^2*F6^2*F8*y1^4*y3^2+4*F5*F7*y1^6-F6^2*y1^6)/(16*y1^6)")
        printed = {
            "minor1": one("(3*A6^4*y3^4+5*y1^4)/y1^4"),
            "minor2": one("(12*A6^4*F7*y3^4-F6^2*y1^4+20*F7*y1^4)/(4*y1^4)"),
            "minor3": one("A6^4*y3^2*(4*A6^4*F7*y3^4+3*F6^2*y1^4+24*F6*y1^3*y3+60*F7*y1^4)/(2*y1^6)"),
            "minor4": one("A6^2*(32*A6^6*F7*F8*y3^6-12*A6^4*F7*y1^2*y3^4-24*A6^2*F6^2*F8*y1^4*y3^2"
                          "+480*A6^2*F7*F8*y1^4*y3^2+F6^2*y1^6-20*F7*y1^6)/(16*y1^6)"),
        }
        notes = ["printed minors have F5 = 5 substituted; the third also has +3 F6^2 for -3 F6^2 "
                 "and a spurious 24 F6 y1^3 y3 term",
                 "e4 is semi-concurrent too (y4 enters E only quadratically), so the null space "
                 "is span{e2, e4}"]
        riem, scdim = False, 2
    else:
        g = [("g11", f"((F1*y2+y4)*(A5*y2+A6*y3)^2 + F5*y1^3)/y1^3"),
             ("g12", "-(1/2)*(A5^2*y2*(3*F1*y2+2*y4)+4*A5*A6*F1*y2*y3+A6^2*F1*y3^2+2*A5*A6*y3*y4"
                     "+A5*y1^2-F6*y1^2)/y1^2"),
             ("g22", "(3*A5^2*F1*y2+2*A5*A6*F1*y3+A5^2*y4+F7*y1)/y1"),
             ("g13", "-(1/2)*A6*(2*A5*F1*y2^2+2*A6*F1*y2*y3+2*A5*y2*y4+2*A6*y3*y4+y1^2)/y1^2"),
             ("g23", "A6*(2*A5*F1*y2+A6*F1*y3+A5*y4)/y1"), ("g14", "-(1/2)*(A5*y2+A6*y3)^2/y1^2"),
             ("g24", "A5*(A5*y2+A6*y3)/y1"), ("g33", "A6^2*(F1*y2+y4)/y1"),
             ("g34", "A6*(A5*y2+A6*y3)/y1"), ("g44", "F8")]
        C = [("C111", "-(3/2)*(A5*y2^2*(F1*(A5*y2+2*A6*y3)+A5*y4)+A6^2*y3^2*(F1*y2+y4)"
                      "+2*A5*A6*y2*y3*y4)/y1^4"),
             ("C112", "(1/2)*(3*A5^2*F1*y2^2+4*A5*A6*F1*y2*y3+A6^2*F1*y3^2+2*A5^2*y2*y4"
                      "+2*A5*A6*y3*y4)/y1^3"),
             ("C113", "A6*(A5*F1*y2^2+A6*F1*y2*y3+A5*y2*y4+A6*y3*y4)/y1^3"),
             ("C122", "-(1/2)*A5*(3*A5*F1*y2+2*A6*F1*y3+A5*y4)/y1^2"),
             ("C123", "-(1/2)*A6*(2*A5*F1*y2+A6*F1*y3+A5*y4)/y1^2"),
             ("C124", "-(1/2)*A5*(A5*y2+A6*y3)/y1^2"), ("C133", "-(1/2)*A6^2*(F1*y2+y4)/y1^2"),
             ("C134", "-(1/2)*A6*(A5*y2+A6*y3)/y1^2"), ("C222", "(3/2)*A5^2*F1/y1"),
             ("C223", "A6*A5*F1/y1"), ("C224", "(1/2)*A5^2/y1"), ("C233", "(1/2)*A6^2*F1/y1"),
             ("C234", "(1/2)*A6*A5/y1"), ("C114", "(1/2)*(A5^2*y2^2+2*A5*A6*y2*y3+A6^2*y3^2)/y1^3"),
             ("C334", "(1/2)*A6^2/y1")]
        printed = {
            "g11": one("(A5^2*y2^2*(F1*y2+y4)+2*A5*A6*F1*y2*y3*(y2+y4)+A6^2*y3^2*(F1*y2+y4)"
                       "+5*y1^3)/y1^3"),
            "g12": one("-(1/2)*(A5^2*y2*(3*F1*y2+2*y4)+4*A5*A6*F1*y2*y3+A6^2*F1*y3^2+2*A5*A6*y3*y4"
                       "-F6*y1^2)/y1^2"),
        }
        notes = ["printed g11 has F5 = 5 substituted and 2 A5 A6 F1 y2 y3 (y2 + y4) where "
                 "2 A5 A6 y2 y3 (F1 y2 + y4) is correct",
                 "printed g12 omits the -A5 y1^2 / 2 contribution of -(A5 y2 + A6 y3) y1",
                 f"expected SC direction (0, 1, -A5/A6, -F1) with F1 = {F1t}"]
        riem, scdim = False, 1
    art = ExpectedArtifacts(
        g=tab(g), C=tab(C), C_complete=True, minors=tuple(one(m) for m in minors),
        fields=base.fields + _ex5_fields(which, spec), sc_direction=base.sc_direction,
        sc_dimension=scdim, printed=MappingProxyType(printed), riemannian=riem, notes=tuple(notes))
    return spec, art


def _f1(F1):
    return parse_expr(F1, 4) if isinstance(F1, str) else const(float(F1))


def _ex5_fields(which, spec):
    if which == 2:
        return (ExpectedField(VectorFieldSpec.parse("", 4, kind="gradient", potential="x2"), "F",
                              True, "f_i = e2 raised by g^{ij} is y-independent when F6 = 0"),
                ExpectedField(VectorFieldSpec.parse("", 4, kind="conformal", potential="x2"), "CC"),
                ExpectedField(VectorFieldSpec.parse("0;0;0;1", 4), "SC", True,
                              "e4: not listed in the source but semi-concurrent"))
    return ()


def builtin(name: str, **overrides) -> tuple[MetricSpec, ExpectedArtifacts]:
    """A catalog metric and its expected artifacts; see :data:`DEFAULTS`."""
    if name not in DEFAULTS:
        raise UnknownIdentifier(f"unknown catalog metric {name!r}; known: {', '.join(names())}")
    unknown = set(overrides) - set(DEFAULTS[name])
    if unknown:
        raise UnknownIdentifier(f"invalid override(s) for {name}: {', '.join(sorted(unknown))}")
    d = {**DEFAULTS[name], **overrides}
    if name == "euclidean_n":
        return _euclidean(int(d["n"]))
    if name == "product3d":
        return _product3d(float(d["f"]))
    if name == "conic_randers_lift":
        return _conic(float(d["eps"]))
    if name == "randers2d":
        return _randers2d(float(d["eps"]))
    return _ex5(int(name[-1]), {k: v for k, v in overrides.items()})


# -- verification ---------------------------------------------------------------

@dataclass
class VerificationReport:
    name: str
    tol: float
    entries: list
    passed: bool
    grid: list = field(default_factory=list)

    def to_dict(self):
        return {"name": self.name, "tol": self.tol, "entries": self.entries, "passed": self.passed,
                "grid": self.grid}


def _eval_many(e: Expr, pts, params):
    tape = compile_tape((e,))
    X = np.array([p.x for p in pts])
    Y = np.array([p.y for p in pts])
    out, status, bad = tape.run(X, Y, params, threads=1)
    if np.any(status):
        k = int(np.nonzero(status)[0][0])
        raise tape.error_for(int(status[k]), int(bad[k]))
    return out[:, 0]


def relative_deviation(computed, expected, floor):
    """|a - b| / max(|b|, floor) elementwise."""
    computed = np.asarray(computed, float)
    expected = np.asarray(expected, float)
    return np.abs(computed - expected) / np.maximum(np.abs(expected), floor)


def verify_example(name: str, tol: float = 1e-7, n_points: int = 50, seed: int = 0,
                   **overrides) -> VerificationReport:
    """Compare computed tensors with the expected closed forms on a seeded grid.

    Deviations are relative, with a floor of 1e-3 times the largest component
    of the same tensor at that point so that vanishing entries stay meaningful.
    Misprinted forms are reported alongside but do not decide the verdict.
    """
    spec, art = builtin(name, **overrides)
    pts = sample_points(spec, n_points, seed)
    fbs = [fundamental_bundle(spec, p) for p in pts]
    entries = []

    def add(entry):
        entries.append(entry)

    for kind, table in (("g", art.g), ("C", art.C)):
        for idx, e in table:
            nm = component_name(kind, idx)
            comp = np.array([(fb.g.data if kind == "g" else fb.C.data)[idx] for fb in fbs])
            floors = np.array([max(1e-3 * float(np.max(np.abs(fb.g.data if kind == "g" else fb.C.data))),
                                   1e-300) for fb in fbs])
            exp = _eval_many(e, pts, spec.params)
            dev = float(np.max(relative_deviation(comp, exp, floors)))
            entry = {"component": nm, "max_rel_dev": dev, "passed": dev <= tol}
            if nm in art.printed:
                pdev = float(np.max(relative_deviation(comp, _eval_many(art.printed[nm], pts, spec.params),
                                                       floors)))
                entry["printed_max_rel_dev"] = pdev
                entry["printed_matches"] = pdev <= tol
            add(entry)
    if art.C_complete and art.C is not None and spec.dim > 0:
        listed = {tuple(sorted(i)) for i, _ in art.C}
        worst = 0.0
        for fb in fbs:
            for idx in np.ndindex(*fb.C.data.shape):
                if tuple(sorted(idx)) not in listed:
                    worst = max(worst, abs(float(fb.C.data[idx])))
        add({"component": "unlisted_C", "max_abs": worst, "passed": worst <= 1e-9})
    if art.minors:
        for k, e in enumerate(art.minors, start=1):
            comp = np.array([leading_minors(fb.g.data)[k - 1] for fb in fbs])
            exp = _eval_many(e, pts, spec.params)
            dev = float(np.max(relative_deviation(comp, exp, 1e-12)))
            entry = {"component": f"minor{k}", "max_rel_dev": dev, "passed": dev <= max(tol, 1e-9)}
            if f"minor{k}" in art.printed:
                pspec = spec.with_params(F5=5.0) if "F5" in spec.params else spec
                pfbs = [fundamental_bundle(pspec, p) for p in pts]
                pcomp = np.array([leading_minors(fb.g.data)[k - 1] for fb in pfbs])
                pdev = float(np.max(relative_deviation(
                    pcomp, _eval_many(art.printed[f"minor{k}"], pts, pspec.params), 1e-12)))
                entry["printed_max_rel_dev_at_F5_5"] = pdev
                entry["printed_matches"] = pdev <= max(tol, 1e-9)
            add(entry)
    for ef in art.fields:
        rep = check_condition(spec, ef.field, ef.condition, pts[:20], tol=max(tol, 1e-7))
        add({"component": f"field:{ef.condition}:{';'.join(ef.field.to_dict()['components'])}",
             "max_residual": rep.max_residual, "condition_passed": rep.passed,
             "expected_to_pass": ef.should_pass, "passed": rep.passed == ef.should_pass,
             "note": ef.note})
    if name == "product3d":
        cv = max(float(np.max(np.abs(fb.C_vec.data))) for fb in fbs)
        cm = min(float(np.max(np.abs(fb.C.data))) for fb in fbs)
        add({"component": "C_vec", "max_abs": cv, "passed": cv < 1e-10})
        add({"component": "C_nonzero", "min_max_abs": cm, "passed": cm > 0.01})
        rng = np.random.default_rng(seed)
        worst, smallest = 0.0, float("inf")
        ob = art.obstructions["BC11"]
        for p, fb in zip(pts, fbs):
            B = rng.standard_normal(3)
            val = float(compile_tape((ob,))(p.x, p.y, {**spec.params, "B1": B[0], "B2": B[1], "B3": B[2]})[0])
            direct = float(B @ fb.C.data[:, 0, 0])
            worst = max(worst, abs(val - direct) / max(abs(direct), 1e-12))
            smallest = min(smallest, abs(direct))
        add({"component": "obstruction_BC11", "max_rel_dev": worst, "min_abs": smallest,
             "passed": worst <= tol and smallest > 0})
    if art.sc_dimension is not None:
        rep = sc_detect(spec, 3, seed=seed,
                        expected=[art.sc_direction] if art.sc_direction is not None else [])
        add({"component": "sc_dimension", "detected": rep.consistent_dimension,
             "expected": art.sc_dimension, "passed": rep.consistent_dimension == art.sc_dimension})
    passed = all(e["passed"] for e in entries)
    grid = [{"x": list(p.x), "y": list(p.y)} for p in pts]
    return VerificationReport(name, tol, entries, passed, grid)
