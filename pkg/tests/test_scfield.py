import numpy as np
import pytest

from finslerlab.catalog import builtin, names
from finslerlab.dsl import Bindings
from finslerlab.errors import FinslerLabError, IncompatibleKind
from finslerlab.sampling import sample_directions, sample_points
from finslerlab.scfield import (
    VectorFieldSpec, check_condition, gradient_diagnostic, independence_invariants,
    principal_angles, raised_gradient, sc_detect, sc_nullspace_at,
)
from finslerlab.tensors import fundamental_bundle


def test_principal_angles():
    e = np.eye(3)
    assert principal_angles(e[:, :1], e[:, :1])[0] == pytest.approx(0)
    assert principal_angles(e[:, :1], e[:, 1:2])[0] == pytest.approx(np.pi / 2)
    v = np.array([[1.0], [1.0], [0.0]])
    assert principal_angles(e[:, :2], v)[0] == pytest.approx(0, abs=1e-12)


def test_field_parsing():
    f = VectorFieldSpec.parse("0;0;-x3", 3, kind="concurrent")
    assert f.values(builtin("conic_randers_lift")[0], (1, 1, 2)).tolist() == [0, 0, -2]
    with pytest.raises(ValueError):
        VectorFieldSpec.parse("y1;0;0", 3)
    with pytest.raises(FinslerLabError):
        VectorFieldSpec.parse("0;0", 3)
    g = VectorFieldSpec.parse("", 3, kind="gradient", potential="x1*x3")
    assert g.values(builtin("conic_randers_lift")[0], (2, 1, 3)).tolist() == [3, 0, 2]
    with pytest.raises(FinslerLabError):
        VectorFieldSpec.parse("0;k;0", 3).values(builtin("conic_randers_lift")[0], (1, 1, 1))


def test_condition_needs_potential():
    spec, _ = builtin("conic_randers_lift")
    with pytest.raises(IncompatibleKind):
        check_condition(spec, VectorFieldSpec.parse("0;0;1", 3), "F", 2)
    with pytest.raises(IncompatibleKind):
        check_condition(spec, VectorFieldSpec.parse("0;1", 2), "SC", 2)


@pytest.mark.parametrize("name", ["conic_randers_lift", "ex5_2", "ex5_3"])
def test_nullspace_is_sound_on_fresh_directions(name):
    spec, _ = builtin(name)
    x = sample_points(spec, 1, seed=3)[0].x
    ns = sc_nullspace_at(spec, x, sample_directions(spec, x, 24, seed=1))
    assert ns.dim >= 1 and ns.soundness < 1e-8
    for y in sample_directions(spec, x, 10, seed=99):
        C = fundamental_bundle(spec, Bindings(x, y)).C.data
        r = np.einsum("hij,hd->ijd", C, ns.basis)
        assert np.max(np.abs(r)) <= 1e-7 * max(1.0, np.max(np.abs(C)))


def test_nullspace_needs_enough_samples():
    spec, _ = builtin("conic_randers_lift")
    x = (1.0, 0.5, 1.0)
    with pytest.raises(FinslerLabError):
        sc_nullspace_at(spec, x, sample_directions(spec, x, 3))


def test_euclidean_has_zero_cartan():
    spec, _ = builtin("euclidean_n")
    rep = sc_detect(spec, 2)
    assert rep.c_zero and rep.consistent_dimension == 3


def test_conic_detects_the_vertical_direction():
    spec, art = builtin("conic_randers_lift")
    rep = sc_detect(spec, 3, expected=[art.sc_direction])
    assert rep.consistent_dimension == 1
    assert isinstance(rep.candidate_field, VectorFieldSpec)
    assert rep.residual_stats["SC"]["passed"]


def _instances(condition):
    for n in names():
        spec, art = builtin(n)
        for ef in art.fields:
            if ef.condition == condition and ef.should_pass:
                yield n, spec, ef.field


@pytest.mark.parametrize("name,spec,fld", list(_instances("F")), ids=lambda v: v if isinstance(v, str) else "")
def test_f_condition_implies_sc(name, spec, fld):
    pts = sample_points(spec, 6, seed=2)
    assert check_condition(spec, fld, "F", pts).passed
    for p in pts:
        b = raised_gradient(spec, fld, p)
        # b is the same for every y at this x and annihilates C
        for y in sample_directions(spec, p.x, 4, seed=5):
            fb = fundamental_bundle(spec, Bindings(p.x, y))
            np.testing.assert_allclose(raised_gradient(spec, fld, Bindings(p.x, y)), b, atol=1e-9)
            assert np.max(np.abs(np.einsum("h,hij->ij", b, fb.C.data))) < 1e-9 * max(1, np.max(np.abs(fb.g.data)))


@pytest.mark.parametrize("name,spec,fld", list(_instances("C")), ids=lambda v: v if isinstance(v, str) else "")
def test_concurrent_implies_sc(name, spec, fld):
    rep = check_condition(spec, fld, "C", 8)
    assert rep.passed
    assert check_condition(spec, fld, "SC", 8).passed


def test_wrong_sign_concurrent_field_fails():
    spec, _ = builtin("conic_randers_lift")
    rep = check_condition(spec, VectorFieldSpec.parse("0;0;x3", 3), "C", 5)
    assert not rep.passed
    assert rep.details["sc_max"] < 1e-12
    assert rep.details["hcov_max"] == pytest.approx(2.0)


@pytest.mark.parametrize("name,spec,fld", list(_instances("SC")), ids=lambda v: v if isinstance(v, str) else "")
def test_sc_fields_contract_t_tensor(name, spec, fld):
    from finslerlab.connections import t_tensor
    for p in sample_points(spec, 5, seed=8):
        fb = fundamental_bundle(spec, p)
        B = fld.values(spec, p.x)
        B0 = float(fb.g.data @ B @ np.array(p.y))
        T4, _ = t_tensor(spec, p)
        lhs = np.einsum("i,hijk->hjk", B, T4.data)
        scale = max(1.0, np.max(np.abs(fb.g.data))) * max(1.0, np.max(np.abs(B)))
        assert np.max(np.abs(lhs - B0 / fb.F * fb.C.data)) < 1e-7 * scale


def test_independence_invariants_and_gradient_diagnostic():
    spec, art = builtin("conic_randers_lift")
    fld = art.sc_direction
    inv = independence_invariants(spec, fld, 5)
    assert len(inv["B0_values"]) == 5 and not inv["any_flagged"]
    p = sample_points(spec, 1, seed=0)[0]
    diag = gradient_diagnostic(spec, fld, p, sample_directions(spec, p.x, 5))
    assert diag["nonzero"] and diag["y_spread"] < 1e-12


from hypothesis import given, settings, strategies as st


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5))
def test_principal_angles_properties(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    A = rng.standard_normal((n, k))
    mix = rng.standard_normal((k, k)) + 3 * np.eye(k)
    # same span, different basis
    assert np.max(principal_angles(A, A @ mix)) < 1e-7
    B = rng.standard_normal((n, int(rng.integers(1, n + 1))))
    ang = principal_angles(A, B)
    assert np.all(ang >= 0) and np.all(ang <= np.pi / 2 + 1e-12)
    np.testing.assert_allclose(ang, principal_angles(B, A), atol=1e-10)
