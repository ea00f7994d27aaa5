import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerlab import _tape_py
from finslerlab.dsl import Bindings, evaluate, metric_source, parse_expr, parse_metric
from finslerlab.errors import DimensionMismatch, DomainViolation, DSLSyntaxError, UnknownIdentifier
from finslerlab.expr import add, const, mul, to_source, xvar, yvar
from finslerlab.fd import default_step, nested_diff
from finslerlab.symdiff import differentiate
from finslerlab.tape import Tape, compile_tape

try:
    from finslerlab import _tape
except ImportError:
    _tape = None


def ev(text, x=(0.7, 1.3), y=(0.4, -0.9), params=None, dim=2):
    return evaluate(parse_expr(text, dim, tuple(params or ())), Bindings(x, y, params or {}))


@pytest.mark.parametrize("text,expected", [
    ("1 + 2*3", 7.0),
    ("2^3^2", 512.0),
    ("-2^2", -4.0),
    ("(y1 + y2)^2", (0.4 - 0.9) ** 2),
    ("sqrt(x1^2 + x2^2)", math.hypot(0.7, 1.3)),
    ("exp(log(x2))", 1.3),
    ("sin(x1)^2 + cos(x1)^2", 1.0),
    ("x1/x2*y1", 0.7 / 1.3 * 0.4),
    ("1.5e-1 * 2", 0.3),
])
def test_parse_and_evaluate(text, expected):
    assert ev(text) == pytest.approx(expected, rel=1e-14, abs=1e-15)


def test_parameters_bind():
    assert ev("eps*y2", params={"eps": 0.5}) == pytest.approx(-0.45)


@pytest.mark.parametrize("text,exc", [
    ("1 +", DSLSyntaxError),
    ("(y1", DSLSyntaxError),
    ("y1 ** 2", DSLSyntaxError),
    ("foo(y1)", UnknownIdentifier),
    ("z1 + y1", UnknownIdentifier),
    ("y3", DimensionMismatch),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_expr(text, 2)


def test_syntax_error_reports_position():
    with pytest.raises(DSLSyntaxError) as info:
        parse_metric("dim = 2\nenergy = y1^2 + * y2\n")
    assert "2" in str(info.value)


def test_domain_violation_on_evaluation():
    with pytest.raises(DomainViolation):
        ev("sqrt(y2)")
    with pytest.raises(DomainViolation):
        ev("log(y2)")
    with pytest.raises(DomainViolation):
        ev("1/(y1 - 0.4)")


def test_metric_file_round_trip():
    src = ("label = \"r\"\ndim = 2\nparam eps = 0.5\n"
           "energy = (sqrt(y1^2 + x1^2*y2^2) + eps*y2)^2/2\n"
           "domain = x1^2 > eps^2 and y1^2 + y2^2 > 0\n")
    spec = parse_metric(src)
    again = parse_metric(metric_source(spec))
    assert again == spec


def test_metric_file_errors():
    with pytest.raises(DSLSyntaxError):
        parse_metric("energy = y1^2\n")
    with pytest.raises(DSLSyntaxError):
        parse_metric("dim = 2\ndim = 3\nenergy = y1^2\n")
    with pytest.raises(DSLSyntaxError):
        parse_metric("dim = 2\nparam x1 = 1\nenergy = y1^2\n")
    with pytest.raises(UnknownIdentifier):
        parse_metric("dim = 2\nenergy = a*y1^2\n")


# random expressions -------------------------------------------------------

LEAVES = st.sampled_from(["x1", "x2", "y1", "y2", "a"]) | st.integers(1, 5).map(str)


def _tree(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, st.integers(2, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        children.map(lambda c: f"sin({c})"),
        children.map(lambda c: f"exp(sin({c}))"),
        children.map(lambda c: f"sqrt(1 + ({c})^2)"),
    )


EXPRS = st.recursive(LEAVES, _tree, max_leaves=8)
POINT = dict(x=(0.7, -1.1), y=(0.45, 0.8), params={"a": 1.7})


def _ev(e):
    return evaluate(e, Bindings(POINT["x"], POINT["y"], POINT["params"]))


@settings(max_examples=60, deadline=None)
@given(EXPRS)
def test_source_round_trip(text):
    e = parse_expr(text, 2, ("a",))
    again = parse_expr(to_source(e), 2, ("a",))
    assert _ev(again) == pytest.approx(_ev(e), rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(EXPRS, EXPRS, st.floats(-3, 3))
def test_derivative_is_linear(t1, t2, c):
    a, b = parse_expr(t1, 2, ("a",)), parse_expr(t2, 2, ("a",))
    v = yvar(0)
    lhs = differentiate(add(a, mul(const(c), b)), v)
    rhs = add(differentiate(a, v), mul(const(c), differentiate(b, v)))
    assert _ev(lhs) == pytest.approx(_ev(rhs), rel=1e-10, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(EXPRS)
def test_mixed_partials_commute(text):
    e = parse_expr(text, 2, ("a",))
    d1 = differentiate(differentiate(e, xvar(0)), yvar(1))
    d2 = differentiate(differentiate(e, yvar(1)), xvar(0))
    assert _ev(d1) == pytest.approx(_ev(d2), rel=1e-10, abs=1e-10)


def _fd_oracle(e, idx):
    def f(z):
        return evaluate(e, Bindings(z[:2], z[2:], POINT["params"]))
    z = np.array(POINT["x"] + POINT["y"])
    return float(nested_diff(f, z, idx, default_step(len(idx))))


@settings(max_examples=25, deadline=None)
@given(EXPRS, st.lists(st.integers(0, 3), min_size=1, max_size=4))
def test_symbolic_matches_finite_differences(text, idx):
    e = parse_expr(text, 2, ("a",))
    d = e
    for k in idx:
        d = differentiate(d, xvar(k) if k < 2 else yvar(k - 2))
    exact = _ev(d)
    approx = _fd_oracle(e, idx)
    scale = max(1.0, abs(exact), max(abs(_ev(e)), 1.0))
    assert abs(exact - approx) <= 1e-5 * scale


@pytest.mark.skipif(_tape is None, reason="extension not built")
@settings(max_examples=40, deadline=None)
@given(EXPRS)
def test_backends_agree(text):
    e = parse_expr(text, 2, ("a",))
    roots = (e, differentiate(e, yvar(0)))
    X = np.array([[0.7, -1.1], [0.3, 0.9]])
    Y = np.array([[0.45, 0.8], [-0.2, 0.6]])
    out_c = Tape(roots, backend=_tape).run(X, Y, {"a": 1.7}, threads=1)[0]
    out_p = Tape(roots, backend=_tape_py).run(X, Y, {"a": 1.7}, threads=1)[0]
    np.testing.assert_allclose(out_c, out_p, rtol=1e-13, atol=1e-13)


def test_tape_matches_tree_evaluation():
    e = parse_expr("sqrt(y1^2 + x1^2*y2^2) * exp(x2/3) - y1*y2/(1 + x1^2)", 2)
    tape = compile_tape((e,))
    assert tape(POINT["x"], POINT["y"])[0] == pytest.approx(_ev(e), rel=1e-15)


def test_pure_python_fallback_is_selected_at_import():
    import os
    import subprocess
    import sys
    code = ("import finslerlab; from finslerlab.catalog import builtin; "
            "from finslerlab.dsl import Bindings; from finslerlab.tensors import fundamental_bundle; "
            "s, _ = builtin('conic_randers_lift'); "
            "print(finslerlab.BACKEND, repr(float(fundamental_bundle(s, Bindings((1, .3, 1), (.2, .5, 1))).C.data[0, 0, 1])))")
    env = dict(os.environ, FINSLERLAB_PURE_PYTHON="1")
    pure = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    env.pop("FINSLERLAB_PURE_PYTHON")
    default = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    b1, v1 = pure.stdout.split()
    b2, v2 = default.stdout.split()
    assert b1 == "python"
    assert float(v1) == pytest.approx(float(v2), rel=1e-13)
