import numpy as np
import pytest

from dbarlab import forms as fm
from dbarlab import geometry as geo
from dbarlab import kernels as kn
from dbarlab.errors import StencilError

BALL = geo.Ball(2)
LB = kn.leray_ball(2, BALL)


def test_ball_support_function():
    assert LB.Phi(np.zeros(2), np.array([1, 0], complex)) == pytest.approx(1.0)
    assert LB.Phi(np.array([0.5, 0], complex), np.array([1, 0], complex)) == pytest.approx(0.5)


def test_phi_holomorphic_in_z():
    rng = np.random.default_rng(0)
    z, w = kn.sample_valid_pairs(BALL, 10, rng)
    h = 1e-5
    for k in range(2):
        e = np.zeros(2, complex)
        e[k] = h
        dzb = 0.5 * ((LB.Phi(z + e, w) - LB.Phi(z - e, w)) / (2 * h) + 1j * (LB.Phi(z + 1j * e, w) - LB.Phi(z - 1j * e, w)) / (2 * h))
        assert np.max(np.abs(dzb)) <= 1e-8


def test_levi_map_reduces_to_ball():
    lv = kn.leray_levi(BALL)
    rng = np.random.default_rng(1)
    z, w = kn.sample_valid_pairs(BALL, 50, rng)
    assert np.allclose(lv.W(z, w), LB.W(z, w))


def test_levi_map_ellipsoid():
    e = geo.Ellipsoid([1, 2])
    lv = kn.leray_levi(e)
    w = np.array([0.9 + 0.1j, 0.3j])
    assert np.allclose(lv.W(np.zeros(2), w), [np.conj(w[0]), 2 * np.conj(w[1])])
    b = np.array([1.0, 0], complex)
    assert lv.Phi(b, b) == 0


def test_cauchy_kernel_reduction():
    z, w = np.array([0.2 + 0.1j]), np.array([np.exp(0.7j)])
    g = np.array([np.conj(w[0])])
    t = kn.bm_table(1, 0, 0, z, w, measure="boundary", rho_grad=g).values[0, 0]
    # surface measure on the unit circle: d zeta = i zeta d(theta)
    assert t == pytest.approx(1j * w[0] / (2j * np.pi * (w[0] - z[0])))


def test_bm_homogeneity():
    w = np.array([0.3 + 0.4j, -0.2 + 0.1j])
    t = 2.7
    a = kn.bm_table(2, 0, 1, np.zeros(2), w).values
    b = kn.bm_table(2, 0, 1, np.zeros(2), t * w).values
    assert np.allclose(b, t ** (1 - 4) * a)


def test_leray_table_vanishes_for_positive_degree():
    z, w = np.zeros(2), np.array([1.1, 0.2], complex)
    assert np.all(kn.leray_table(LB, 2, 1, z, w).values == 0)


def test_mixed_table_degree_bookkeeping():
    z, w = np.zeros(2), np.array([1.1, 0.2], complex)
    assert np.all(kn.mixed_table(LB, 2, -1, z, w, q_in=1).values == 0) if fm.multi_indices(2, -1) else True
    assert kn.mixed_table(LB, 2, 1, z, w).values.size == 0 or np.all(kn.mixed_table(LB, 2, 1, z, w).values == 0)


def test_identity_example_and_order():
    z, w = np.array([0.3, 0]), np.array([1.1, 0.2])
    r1 = kn.homotopy_identity_residual(LB, 2, 1, z, w, 1e-4)
    r2 = kn.homotopy_identity_residual(LB, 2, 1, z, w, 5e-5)
    assert r1 <= 1e-3
    assert 3.0 <= r1 / r2 <= 5.0


def test_identity_levi_map_on_ellipsoid():
    e = geo.Ellipsoid([1, 2])
    lv = kn.leray_levi(e)
    rng = np.random.default_rng(4)
    z, w = kn.sample_valid_pairs(e, 5, rng)
    for a, b in zip(z, w):
        assert kn.homotopy_identity_residual(lv, 2, 1, a, b, 1e-4) <= 1e-3


def test_identity_top_degree_trivial():
    assert kn.homotopy_identity_residual(LB, 2, 2, np.array([0.3, 0]), np.array([1.1, 0.2]), 1e-4) <= 1e-8


def test_identity_rejects_near_singular_stencil():
    with pytest.raises(StencilError):
        kn.homotopy_identity_residual(LB, 2, 1, np.array([0.3, 0]), np.array([0.30001, 0]), 1e-4)


def test_support_bounds_positive():
    rng = np.random.default_rng(0)
    z, w = kn.sample_boundary_pairs(BALL, np.array([1, 0], complex), 2000, 0.3, rng)
    b = kn.support_bound_scan(LB, BALL, (z, w))
    assert b.c1 > 0 and b.c2 > 0
    assert b.count == 2000


def test_support_bounds_rejects_diagonal():
    p = np.array([[0.5, 0]], complex)
    with pytest.raises(ValueError):
        kn.support_bound_scan(LB, BALL, (p, p))
