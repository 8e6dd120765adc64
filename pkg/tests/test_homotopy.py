import numpy as np
import pytest

from dbarlab import forms as fm
from dbarlab import geometry as geo
from dbarlab import homotopy as hm
from dbarlab.errors import DegreeError, DomainRangeError, UnsupportedInputError

BALL = geo.Ball(2)
Z, ZB = fm.zsyms(2)
SOLVER = hm.HomotopySolver(BALL, level=1)
P = np.array([0.3 + 0.2j, -0.1j])


@pytest.mark.parametrize("expr, z, expected", [
    ("1", [0, 0], 1.0),
    ("z1**2", [0.3, 0], 0.09),
    ("z1*z2", [0.2, 0.1], 0.02),
])
def test_bm_reproduce(expr, z, expected):
    f = fm.field(fm.sp.sympify(expr, locals={"z1": Z[0], "z2": Z[1]}), 2)
    assert hm.bm_reproduce(f, np.array(z, complex), level=4) == pytest.approx(expected, abs=1e-10)


def test_bm_reproduce_rejects_exterior():
    with pytest.raises(DomainRangeError):
        hm.bm_reproduce(lambda p: np.ones(p.shape[:-1]), np.array([1.2, 0]), 2)


def test_zero_form_gives_zero():
    zero = fm.zero_form(2, 1)
    assert np.all(SOLVER.u0(zero, P) == 0)
    assert np.all(SOLVER.u1(zero, P) == 0)
    assert np.all(SOLVER.h0(fm.zero_form(2, 0), P) == 0)


def test_linearity():
    a, b = fm.make_test_family("exact_polynomial", 2)[:2]
    lhs = SOLVER.h_q(a + b.scaled(2.0), P)
    rhs = SOLVER.h_q(a, P) + 2.0 * SOLVER.h_q(b, P)
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_u0_self_convergence_at_origin():
    phi = fm.exact_form(ZB[0] * ZB[1], 2)
    vals = [SOLVER.u0(phi, np.zeros(2), lv)[0] for lv in (0, 1, 2)]
    assert abs(vals[2] - vals[1]) <= abs(vals[1] - vals[0]) + 1e-14


def test_u1_output_shape():
    phi = fm.exact_form(ZB[0] * ZB[1], 2)
    assert SOLVER.u1(phi, P).shape == (1,)


def test_h0_reproduces_holomorphic():
    assert SOLVER.h0(fm.field(Z[0], 2), np.array([0.2, 0])) == pytest.approx(0.2, abs=1e-8)


def test_h0_full_identity():
    res = SOLVER.h0_identity_residual(fm.field(ZB[0], 2), P)
    assert abs(res) <= 1e-6


@pytest.mark.parametrize("k", [0, 1, 2])
def test_residual_exact_family(k):
    phi = fm.make_test_family("exact_polynomial", 2)[k]
    assert np.max(np.abs(SOLVER.homotopy_residual(phi, P))) <= 1e-6


def test_residual_nonclosed_includes_second_term():
    phi = fm.Form(2, 1, {(1,): fm.SymbolicCoefficient(ZB[1], 2)})
    full = SOLVER.homotopy_residual(phi, P)
    one_term = SOLVER.homotopy_residual(phi, P, closed=True)
    assert np.max(np.abs(full)) <= 1e-6
    assert np.max(np.abs(one_term)) > 1e-2


def test_residual_ellipsoid():
    e = geo.Ellipsoid([1, 2], delta=0.2)
    s = hm.HomotopySolver(e, level=0)
    phi = fm.make_test_family("exact_polynomial", 2)[0]
    assert np.max(np.abs(s.homotopy_residual(phi, 0.8 * P))) <= 1e-6


def test_solve_report():
    fam = fm.make_test_family("exact_polynomial", 2)
    pts = hm.default_points(2, 3, seed=1)
    rep = hm.solve(fam[0], pts, levels=[0, 1], solver=SOLVER)
    assert len(rep.records) == 3 and rep.levels == [0, 1]
    traj = rep.trajectory()
    assert traj[1] <= traj[0]
    assert rep.values.shape == (3, 1)


def test_solve_rejects_nonclosed_and_wrong_degree():
    with pytest.raises(UnsupportedInputError):
        hm.solve(fm.Form(2, 1, {(1,): fm.SymbolicCoefficient(ZB[1], 2)}), P[None], solver=SOLVER)
    with pytest.raises(DegreeError):
        hm.solve(fm.zero_form(2, 0), P[None], solver=SOLVER)


def test_solve_zero_form():
    rep = hm.solve(fm.zero_form(2, 1), P[None], levels=[0], solver=SOLVER)
    assert rep.max_residual == 0.0
    assert np.all(rep.values == 0)


def test_top_degree():
    phi = fm.make_test_family("top_degree", 2)[0]
    rep = hm.solve_top_degree(phi, level=1, points=hm.default_points(2, 2), solver=SOLVER)
    assert rep.max_residual <= 1e-6
    one = fm.Form(2, 2, {(1, 2): fm.SymbolicCoefficient(fm.sp.Integer(1), 2)})
    assert hm.solve_top_degree(one, level=1, points=P[None], solver=SOLVER).max_residual <= 1e-6


def test_exterior_point_rejected():
    with pytest.raises(DomainRangeError):
        SOLVER.h_q(fm.make_test_family("exact_polynomial", 2)[0], np.array([1.0, 0.1]))
