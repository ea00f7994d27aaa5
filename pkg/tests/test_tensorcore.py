import numpy as np
import pytest

from finslerlab.catalog import builtin, names
from finslerlab.dsl import Bindings, parse_metric
from finslerlab.errors import DegenerateMetric, DomainViolation
from finslerlab.fd import central_diff, nested_diff
from finslerlab.sampling import sample_points
from finslerlab.tensors import domain_probe, fundamental_bundle, leading_minors, require_nondegenerate


def _E(spec, x):
    return lambda y: fundamental_bundle(spec, Bindings(x, y)).E


@pytest.mark.parametrize("name", names())
def test_homogeneity_and_euler(name, catalog):
    spec, _ = catalog[name]
    for p in sample_points(spec, 10, seed=3):
        fb = fundamental_bundle(spec, p)
        y = np.array(p.y)
        scale = max(1.0, float(np.max(np.abs(fb.g.data))))
        assert fundamental_bundle(spec, Bindings(p.x, 2.5 * y)).F == pytest.approx(2.5 * fb.F, rel=1e-12)
        assert y @ fb.g.data @ y == pytest.approx(fb.F ** 2, rel=1e-10)
        assert np.max(np.abs(np.einsum("ijk,k->ij", fb.C.data, y))) < 1e-9 * scale
        g2 = fundamental_bundle(spec, Bindings(p.x, 0.3 * y)).g.data
        np.testing.assert_allclose(g2, fb.g.data, rtol=1e-9, atol=1e-12 * scale)
        np.testing.assert_allclose(fb.h.data @ y, 0, atol=1e-9 * scale)
        assert fb.l.data @ fb.l_up.data == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("name", names())
def test_inverse_and_symmetry(name, catalog):
    spec, _ = catalog[name]
    for p in sample_points(spec, 5, seed=4):
        fb = fundamental_bundle(spec, p)
        n = spec.dim
        np.testing.assert_allclose(fb.g.data @ fb.g_inv.data, np.eye(n), atol=1e-10)
        np.testing.assert_array_equal(fb.g.data, fb.g.data.T)
        C = fb.C.data
        for perm in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
            np.testing.assert_allclose(C, C.transpose(perm), atol=1e-14)
        np.testing.assert_allclose(fb.h.data, fb.F * fb.l_der.data, atol=1e-12)


@pytest.mark.parametrize("name", ["randers2d", "conic_randers_lift", "ex5_3", "product3d"])
def test_g_and_C_against_finite_differences(name, catalog):
    spec, _ = catalog[name]
    for p in sample_points(spec, 3, seed=5):
        fb = fundamental_bundle(spec, p)
        E = _E(spec, p.x)
        y = np.array(p.y)
        n = spec.dim
        g_fd = np.array([[nested_diff(E, y, (i, j), 5e-3) for j in range(n)] for i in range(n)])
        scale = float(np.max(np.abs(fb.g.data)))
        np.testing.assert_allclose(g_fd, fb.g.data, atol=1e-6 * scale)
        gfun = lambda v: fundamental_bundle(spec, Bindings(p.x, v)).g.data
        C_fd = 0.5 * np.stack([central_diff(gfun, y, k, 1e-3) for k in range(n)], axis=-1)
        np.testing.assert_allclose(C_fd, fb.C.data, atol=1e-6 * max(scale, 1.0))


def test_euclidean_is_flat():
    spec = parse_metric("dim = 3\nenergy = (y1^2 + y2^2 + y3^2)/2\n")
    fb = fundamental_bundle(spec, Bindings((0.1, 0.2, 0.3), (1.0, -2.0, 0.5)))
    np.testing.assert_allclose(fb.g.data, np.eye(3))
    assert np.all(fb.C.data == 0)
    assert fb.F == pytest.approx(np.sqrt(5.25))


def test_domain_errors():
    spec, _ = builtin("conic_randers_lift")
    with pytest.raises(DomainViolation):
        fundamental_bundle(spec, Bindings((1, 1, 1), (0, 0, 1)))
    with pytest.raises(DomainViolation):
        fundamental_bundle(spec, Bindings((1, 1, 1), (0, 0, 0)))


def test_degenerate_metric_is_reported():
    spec, _ = builtin("conic_randers_lift")
    fb = fundamental_bundle(spec, Bindings((0.0, 0.0, 1.0), (1.0, 1.0, 1.0)))
    assert not fb.nondegenerate
    with pytest.raises(DegenerateMetric):
        require_nondegenerate(fb)


def test_domain_probe_on_conic_ray():
    spec, _ = builtin("conic_randers_lift")
    x = (1.0, 0.3, 1.0)
    near = domain_probe(spec, Bindings(x, (1e-7, 1e-7, 1.0)))
    assert near.in_domain and near.smooth and near.nondegenerate
    edge = domain_probe(spec, Bindings(x, (1e-9, 1e-9, 1.0)))
    assert edge.in_domain and not edge.smooth
    out = domain_probe(spec, Bindings(x, (0.0, 0.0, 1.0)))
    assert not out.in_domain and not out.smooth


def test_domain_probe_definiteness():
    spec, _ = builtin("euclidean_n")
    st = domain_probe(spec, Bindings((0, 0, 0), (1, 0, 0)))
    assert st.positive_definite and st.leading_minors == (1.0, 1.0, 1.0)
    spec = parse_metric("dim = 2\nenergy = (y1^2 - y2^2)/2\n")
    st = domain_probe(spec, Bindings((0, 0), (1, 0.2)))
    assert st.nondegenerate and not st.positive_definite


def test_leading_minors():
    g = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert leading_minors(g) == pytest.approx((2.0, 5.0))
