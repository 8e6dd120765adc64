import numpy as np
import pytest

from dbarlab import forms as fm
from dbarlab import geometry as geo
from dbarlab.extension import CutoffProfile, commutator, commutator_values, extend, extended_values

BALL = geo.Ball(2, delta=0.25)
PROF = CutoffProfile.for_shell(0.25)
Z, ZB = fm.zsyms(2)
PHI = fm.exact_form(ZB[0] * ZB[1] + Z[0] * ZB[1] ** 2, 2)


def test_profile_values():
    assert PROF.chi(-0.5) == 1.0
    assert PROF.chi(PROF.r1 + 0.01) == 0.0
    s = 0.5 * (PROF.r0 + PROF.r1)
    assert 0 < PROF.chi(s) < 1
    assert PROF.chi(s) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        CutoffProfile(0.2, 0.1)


def test_profile_derivative_matches_fd():
    s = np.linspace(PROF.r0, PROF.r1, 11)
    h = 1e-6
    fd = (PROF.chi(s + h) - PROF.chi(s - h)) / (2 * h)
    assert np.allclose(PROF.dchi(s), fd, atol=1e-6)


def test_extension_values():
    pts = np.array([[0.5, 0.0], [1.0 + PROF.r1 + 0.01, 0.0]], complex)
    ev = extended_values(PHI, PROF, BALL, pts)
    assert np.allclose(ev[0], fm.eval_form(PHI, pts[:1])[0])
    assert np.all(ev[1] == 0)
    assert np.allclose(fm.eval_form(extend(PHI, PROF, BALL), pts), ev)


def test_commutator_support():
    pts = np.array([[0.3, 0.1], [1.0 + PROF.r0 / 2, 0]], complex)
    assert np.all(commutator_values(PHI, PROF, BALL, pts) == 0)


def test_commutator_of_closed_form_is_closed():
    ball3 = geo.Ball(3, delta=0.25)
    z3, zb3 = fm.zsyms(3)
    phi = fm.exact_form(zb3[0] * zb3[2] + z3[1] * zb3[1] ** 2, 3)
    pts = np.array([[1.1 + 0.02j, 0.05, 0.01j], [0.0, 1.12j, 0.03]], complex)
    res = fm.eval_form(fm.dbar(commutator(phi, PROF, ball3), h=1e-5), pts)
    assert np.max(np.abs(res)) <= 1e-5


def test_commutator_two_paths_agree():
    pts = np.array([[1.1 + 0.02j, 0.05], [0.0, 1.12j], [0.7, 0.81]], complex)
    a = commutator_values(PHI, PROF, BALL, pts)
    b = fm.eval_form(commutator(PHI, PROF, BALL), pts)
    # dbar(E phi) - E(dbar phi) with dbar phi = 0
    c = fm.eval_form(fm.dbar(extend(PHI, PROF, BALL)), pts)
    assert np.allclose(a, b)
    assert np.allclose(a, c, atol=1e-8)
