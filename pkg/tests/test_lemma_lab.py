import warnings

import numpy as np
import pytest

from dbarlab import geometry as geo
from dbarlab import lemma_lab as lab
from dbarlab.errors import DomainRangeError

BALL = geo.Ball(2)
BASE = np.array([1, 0], complex)
DEEP = lab.delta_sweep(1e-14, 1e-10, 3)


def test_coord_map_example():
    s = lab.coord_map(BALL, BASE, np.array([0.8 + 0.1j, 0.2]))
    assert np.allclose(s, [-0.31, 0.1, 0.2, 0.0])
    assert np.allclose(lab.coord_map(BALL, BASE, BASE), 0)
    b = np.array([0.6, 0.8j])
    assert abs(lab.coord_map(BALL, BASE, b)[0]) < 1e-15


def test_chart_round_trip_ball_and_ellipsoid():
    rng = np.random.default_rng(0)
    ch = lab.Chart.at(BALL, BASE)
    pts = lab.sample_patch(ch, 1000, 0.3, rng)
    assert lab.round_trip_error(ch, pts) <= 1e-10
    assert np.allclose(ch.inverse(np.zeros(4)), BASE)
    e = geo.Ellipsoid([1, 2])
    che = lab.Chart.at(e, np.array([0, 1 / np.sqrt(2)], complex))
    assert che.lead == 1
    assert lab.round_trip_error(che, lab.sample_patch(che, 200, 0.2, rng)) <= 1e-10


def test_positive_s1_is_exterior():
    ch = lab.Chart.at(BALL, BASE)
    z = ch.inverse(np.array([0.05, 0.01, 0.02, -0.01]))
    assert geo.region_classify(BALL, z) == geo.SHELL


def test_jacobian_matches_fd():
    ch = lab.Chart.at(BALL, BASE)
    z = np.array([0.9 + 0.05j, 0.1 - 0.2j])
    J = ch.jacobian(z)
    h = 1e-6
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        dz = e[0::2] + 1j * e[1::2]
        col = (ch(z + dz) - ch(z - dz)) / (2 * h)
        assert np.allclose(J[:, k], col, atol=1e-8)


def test_jacobian_recursion():
    chk = lab.jacobian_recursion_check(6)
    assert chk.ok
    assert chk.dets[1] == pytest.approx(-2)
    for n in range(2, 7):
        assert chk.ratios[n] == pytest.approx(-2, abs=1e-12)


def test_jacobian_recursion_general_gradient():
    chk = lab.jacobian_recursion_check(5, grad_at=lambda n: np.r_[0.6 - 0.3j, np.zeros(n - 1)])
    assert chk.ok and chk.base_value == pytest.approx(-2 * 0.45)


def test_inverse_chart_growth_ball():
    fits, ident = lab.inverse_chart_growth(lab.Chart.at(BALL, BASE))
    assert ident <= 1e-8
    for f in fits:
        assert f.exponent <= f.order - 1 + 0.1


def test_lemma31_i_monotone_and_guards():
    vals = [lab.lemma31_i(d, 0.25) for d in (1e-3, 1e-2, 1e-1)]
    assert vals[0] > vals[1] > vals[2] > 0
    with pytest.raises(DomainRangeError):
        lab.lemma31_i(0.0, 0.25)
    with pytest.raises(ValueError):
        lab.lemma41("iv", 0.1, 0.5)


def test_precision_check_quiet_on_default_grid():
    with warnings.catch_warnings():
        warnings.simplefilter("error", lab.PrecisionWarning)
        lab.lemma31_i(1e-3, 0.25, check=True)
        lab.lemma31_ii(1e-3, 0.3, check=True)


def test_grid_accuracy():
    g = lab.LemmaGrid()
    for d in (1e-4, 1e-1):
        a, b = lab.lemma31_i(d, 0.25, g), lab.lemma31_i(d, 0.25, g.refined())
        assert abs(a - b) <= 1e-5 * b
        a, b = lab.lemma31_ii(d, 0.3, 2, g), lab.lemma31_ii(d, 0.3, 2, g.refined())
        assert abs(a - b) <= 1e-3 * b


def test_intestl_i_example_window():
    res = lab.sweep(lambda d: lab.lemma31_i(d, 0.1))
    assert res.slope == pytest.approx(-0.4, abs=0.1)


def test_intestl_ii_example_window():
    res = lab.sweep(lambda d: lab.lemma31_ii(d, 0.5))
    assert res.slope == pytest.approx(-1.0, abs=0.15)
    assert np.all(np.diff(res.values) < 0)


def test_h0ele_iii_example_window():
    res = lab.sweep(lambda d: lab.lemma41("iii", d, 0.4))
    assert res.slope == pytest.approx(-0.6, abs=0.1)


# Deep-delta checks: the lemmas are asymptotic, and corrections of relative
# size delta^{|1/2 - alpha|} still bias fits at delta ~ 1e-4.

@pytest.mark.parametrize("alpha", [0.25, 0.4])
def test_intestl_i_deep_slope(alpha):
    res = lab.sweep(lambda d: lab.lemma31_i(d, alpha), DEEP)
    assert res.slope == pytest.approx(alpha - 0.5, abs=0.02)


def test_intestl_i_deep_bounded_cases():
    assert lab.sweep(lambda d: lab.lemma31_i(d, 0.75), DEEP).variation <= 1.10
    assert abs(lab.sweep(lambda d: lab.lemma31_i(d, 0.5), DEEP).log_slope) <= 0.01


def test_intestl_ii_deep_slope():
    assert lab.sweep(lambda d: lab.lemma31_ii(d, 0.3), DEEP).slope == pytest.approx(-1.2, abs=0.02)


def test_h0ele_deep():
    assert lab.sweep(lambda d: lab.lemma41("i", d), DEEP).log_variation <= 1.25
    assert lab.sweep(lambda d: lab.lemma41("ii", d, 0.5), DEEP).variation <= 1.25
    assert lab.sweep(lambda d: lab.lemma41("iii", d, 0.7), DEEP).slope == pytest.approx(-0.3, abs=0.02)


def test_delta_sweep_density():
    d = lab.delta_sweep(1e-4, 1e-1, 7)
    assert len(d) == 22 and d[0] == pytest.approx(1e-4) and d[-1] == pytest.approx(1e-1)
