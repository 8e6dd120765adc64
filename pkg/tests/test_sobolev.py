import numpy as np
import pytest

from dbarlab import forms as fm
from dbarlab import geometry as geo
from dbarlab import quadrature as qd
from dbarlab import sobolev as sb

BALL = geo.Ball(2)
Z, ZB = fm.zsyms(2)
ONE = lambda p: np.ones(p.shape[:-1], dtype=complex)
RULE = qd.volume_rule(BALL, 2)


def test_weighted_norm_oracle():
    v = sb.weighted_norm(ONE, sb.NormSpec(0, 2.0, 0.5), RULE, BALL)
    assert v == pytest.approx(np.sqrt(np.pi ** 2 / 10), abs=1e-3)


def test_weighted_norm_zero_and_scaling():
    spec = sb.NormSpec(1, 3.0, 0.4)
    u = fm.field(Z[0] * ZB[1] + ZB[0] ** 2, 2)
    assert sb.weighted_norm(lambda p: 0 * p[..., 0], spec, RULE, BALL) == 0
    a = sb.weighted_norm(u, spec, RULE, BALL)
    b = sb.weighted_norm(lambda p: -2.5 * u(p), spec, RULE, BALL)
    assert b == pytest.approx(2.5 * a, rel=1e-8)  # FD round-off ~ eps / h^2


def test_sobolev_norm_constant():
    assert sb.sobolev_norm(ONE, 0, 2.0, RULE, BALL) == pytest.approx(np.sqrt(np.pi ** 2 / 2), rel=1e-10)


def test_fd_and_analytic_agree():
    u = fm.field(Z[0] * ZB[1] ** 2 + ZB[0], 2)
    fd = sb.weighted_norm(u, sb.NormSpec(1, 2.0, 0.5), RULE, BALL)
    an = sb.weighted_norm(u, sb.NormSpec(1, 2.0, 0.5, scheme="analytic"), RULE, BALL)
    assert fd == pytest.approx(an, rel=1e-6)


def test_re_z1_stable():
    u = fm.field((Z[0] + ZB[0]) / 2, 2)
    a = sb.sobolev_norm(u, 1, 2.0, qd.volume_rule(BALL, 1), BALL)
    b = sb.sobolev_norm(u, 1, 2.0, qd.volume_rule(BALL, 2), BALL)
    assert np.isfinite(a) and abs(a - b) <= 1e-6 * b


def test_triangle_inequality():
    u = fm.field(Z[0] ** 2, 2)
    v = fm.field(ZB[1] * Z[0], 2)
    n = lambda f: sb.sobolev_norm(f, 1, 3.0, RULE, BALL)
    assert n(lambda p: u(p) + v(p)) <= n(u) + n(v) + 1e-12


def test_norm_spec_validation():
    with pytest.raises(ValueError):
        sb.NormSpec(1, 1.0, 0.5)
    with pytest.raises(ValueError):
        sb.NormSpec(1, 2.0, 1.5)


def _ray():
    return np.array([0.5, 0], complex), np.array([1.0, 0], complex)


RADII = np.logspace(-1, -2.5, 7)


def test_blowup_square_root():
    u = lambda p: np.sqrt(1 - np.linalg.norm(p, axis=-1)) + 0j
    fit = sb.blowup_exponent(u, _ray(), RADII, BALL, m=1)
    assert fit.gamma == pytest.approx(0.5, abs=0.05)


def test_blowup_log():
    u = lambda p: np.log(1 - np.linalg.norm(p, axis=-1)) + 0j
    assert sb.blowup_exponent(u, _ray(), RADII, BALL, m=1).gamma == pytest.approx(1.0, abs=0.05)


def test_blowup_polynomial():
    fit = sb.blowup_exponent(fm.field(Z[0] * ZB[1], 2), _ray(), RADII, BALL, m=2)
    assert abs(fit.gamma) <= 0.05


def test_blowup_needs_span():
    with pytest.raises(ValueError):
        sb.blowup_exponent(ONE, _ray(), [1e-1, 1e-2], BALL)
