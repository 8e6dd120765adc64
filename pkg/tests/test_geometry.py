import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbarlab import geometry as geo
from dbarlab.errors import DomainRangeError


def test_ball_jet_at_origin():
    ball = geo.Ball(2)
    rho, grad, (hh, mixed) = geo.rho_jet(ball, np.zeros(2, complex))
    assert rho == pytest.approx(-1.0)
    assert np.allclose(grad, 0)
    assert np.allclose(mixed, np.eye(2))
    assert np.allclose(hh, 0)


def test_ball_boundary_point():
    ball = geo.Ball(2)
    rho, grad, _ = geo.rho_jet(ball, np.array([1, 0], complex))
    assert rho == pytest.approx(0.0)
    assert np.allclose(grad, [1, 0])


def test_ellipsoid_jet():
    e = geo.Ellipsoid([1, 2])
    p = np.array([0, 1 / np.sqrt(2)], complex)
    rho, grad, _ = geo.rho_jet(e, p)
    assert abs(rho) < 1e-15
    assert np.allclose(grad, [0, np.sqrt(2)])


def test_signed_distance_examples():
    ball = geo.Ball(2)
    assert geo.signed_distance(ball, np.zeros(2, complex)) == pytest.approx(-1.0)
    assert geo.signed_distance(ball, np.array([1.5, 0], complex)) == pytest.approx(0.5)
    e = geo.Ellipsoid([1, 2])
    assert geo.signed_distance(e, np.array([0, 1], complex)) == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-12)


def test_ellipsoid_distance_matches_brute_force():
    e = geo.Ellipsoid([1, 2])
    rng = np.random.default_rng(3)
    # dense boundary sample in the real slice (x1, x2)
    th = np.linspace(0, 2 * np.pi, 200001)
    bx = np.stack([np.cos(th), np.sin(th) / np.sqrt(2)], axis=-1)
    for _ in range(5):
        p = rng.uniform(-0.6, 0.6, 2)
        brute = np.min(np.linalg.norm(bx - p, axis=1))
        sd = e.signed_distance(p.astype(complex))
        assert abs(abs(sd) - brute) < 1e-6


def test_out_of_box_rejected():
    with pytest.raises(DomainRangeError):
        geo.signed_distance(geo.Ball(2), np.array([10, 0], complex))


def test_psh_rescale():
    ball = geo.Ball(2)
    r = geo.psh_rescale(ball, 1.0)
    assert r.rho(np.zeros(2, complex)) == pytest.approx(np.exp(-1) - 1)
    b = np.array([0.6, 0.8j])
    assert abs(r.rho(b)) < 1e-15
    assert np.allclose(geo.psh_rescale(ball, 3.0).rho_grad(b), 3.0 * ball.rho_grad(b))


def test_levi_polynomial_ball():
    ball = geo.Ball(2)
    rng = np.random.default_rng(0)
    z = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    w = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    F = geo.levi_polynomial(ball, z, w)
    assert np.allclose(F, np.sum(np.abs(w) ** 2, -1) - np.sum(np.conj(w) * z, -1))
    lhs = 2 * F.real
    rhs = ball.rho(w) - ball.rho(z) + np.sum(np.abs(w - z) ** 2, -1)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    assert np.allclose(geo.levi_polynomial(ball, z, z), 0)


def test_region_classify():
    ball = geo.Ball(2, delta=0.25)
    reg = geo.region_classify(ball, np.array([[0, 0], [1.1, 0], [2, 0]], complex))
    assert list(reg) == [geo.INTERIOR, geo.SHELL, geo.EXTERIOR]


def test_levi_lower_constant_ball_is_one():
    ball = geo.Ball(2)
    rng = np.random.default_rng(1)
    z = 0.5 * (rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))) / 2
    w = 1.1 * z / np.linalg.norm(z, axis=1, keepdims=True)
    assert geo.levi_lower_constant(ball, z, w) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=4, max_size=4), st.floats(0.5, 3.0))
def test_rescale_preserves_sign(xs, L0):
    p = np.array([xs[0] + 1j * xs[1], xs[2] + 1j * xs[3]])
    ball = geo.Ball(2)
    assert np.sign(geo.psh_rescale(ball, L0).rho(p)) == np.sign(ball.rho(p))
