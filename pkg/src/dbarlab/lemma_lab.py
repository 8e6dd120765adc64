"""Boundary charts and the elementary integral estimates behind the solver bounds.

Chart: for a base point ``b`` and the holomorphic gradient ``g = d rho``,

    s1 = rho(zeta),  s2 = Im(g(zeta) . (zeta - b)),
    t  = (Re, Im)(zeta_k - b_k) for every coordinate k except the lead one,

where the lead coordinate is the one with the largest ``|g_k(b)|`` (the
first coordinate whenever it is nonzero, as on the ball at ``(1, 0)``).
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainRangeError

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
ROUND_TRIP_TOL = 1e-10


class PrecisionWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# chart


def _lead(domain, base):
    g = np.abs(domain.rho_grad(np.asarray(base, dtype=complex)))
    return int(np.argmax(g.reshape(-1, g.shape[-1])[0]))


def coord_map(domain, base, zeta, lead=0):
    """``(s1, s2, t_1, ..., t_{2n-2})`` of ``zeta`` in the chart at ``base``."""
    zeta = np.asarray(zeta, dtype=complex)
    base = np.asarray(base, dtype=complex)
    n = zeta.shape[-1]
    g = domain.rho_grad(zeta)
    s1 = domain.rho(zeta)
    s2 = np.imag(np.sum(g * (zeta - base), axis=-1))
    rest = [k for k in range(n) if k != lead]
    diff = (zeta - base)[..., rest]
    t = np.stack([diff.real, diff.imag], axis=-1).reshape(diff.shape[:-1] + (2 * len(rest),))
    return np.concatenate([s1[..., None], s2[..., None], t], axis=-1)


def chart_jacobian(domain, base, zeta, lead=0):
    """Real Jacobian ``d s / d(x_1, y_1, ..., x_n, y_n)``, shape (..., 2n, 2n)."""
    zeta = np.asarray(zeta, dtype=complex)
    base = np.asarray(base, dtype=complex)
    n = zeta.shape[-1]
    g = domain.rho_grad(zeta)
    hh, mixed = domain.rho_hess(zeta)
    d = zeta - base
    J = np.zeros(zeta.shape[:-1] + (2 * n, 2 * n))
    # s1 = rho: d/dx = 2 Re g, d/dy = -2 Im g
    J[..., 0, 0::2] = 2 * g.real
    J[..., 0, 1::2] = -2 * g.imag
    # s2 = Im G, G = sum_j g_j d_j
    dG = np.einsum("...ij,...j->...i", hh, d) + g
    dGb = np.einsum("...ji,...j->...i", mixed, d)
    J[..., 1, 0::2] = np.imag(dG + dGb)
    J[..., 1, 1::2] = np.imag(1j * (dG - dGb))
    row = 2
    for k in range(n):
        if k == lead:
            continue
        J[..., row, 2 * k] = 1.0
        J[..., row + 1, 2 * k + 1] = 1.0
        row += 2
    return J


@dataclass
class Chart:
    domain: object
    base: np.ndarray
    lead: int = 0
    tol: float = NEWTON_TOL

    @classmethod
    def at(cls, domain, base):
        base = np.asarray(base, dtype=complex)
        return cls(domain, base, _lead(domain, base))

    def __call__(self, zeta):
        return coord_map(self.domain, self.base, zeta, self.lead)

    def jacobian(self, zeta):
        return chart_jacobian(self.domain, self.base, zeta, self.lead)

    def inverse(self, s):
        return chart_inverse(self, s)


def _to_real(z):
    x = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    x[..., 0::2] = z.real
    x[..., 1::2] = z.imag
    return x


def _to_complex(x):
    return x[..., 0::2] + 1j * x[..., 1::2]


def chart_inverse(chart, s, maxit=NEWTON_MAXIT):
    """Newton solve of ``chart(zeta) = s`` started at the base point."""
    s = np.asarray(s, dtype=float)
    shape = s.shape[:-1]
    n = chart.base.shape[-1]
    x = np.broadcast_to(_to_real(chart.base), shape + (2 * n,)).copy()
    for _ in range(maxit):
        z = _to_complex(x)
        r = chart(z) - s
        if np.all(np.max(np.abs(r), axis=-1) <= chart.tol):
            break
        step = np.linalg.solve(chart.jacobian(z), r[..., None])[..., 0]
        x = x - step
    else:
        z = _to_complex(x)
        if not np.all(np.max(np.abs(chart(z) - s), axis=-1) <= chart.tol):
            raise ConvergenceError("chart inversion did not converge", last_iterate=z)
    return _to_complex(x)


def round_trip_error(chart, zeta):
    return float(np.max(np.abs(chart.inverse(chart(zeta)) - zeta)))


def sample_patch(chart, count, radius, rng):
    """Seeded points within ``radius`` of the chart base."""
    n = chart.base.shape[-1]
    v = rng.normal(size=(count, 2 * n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v *= radius * rng.uniform(0, 1, (count, 1)) ** (1 / (2 * n))
    return chart.base + _to_complex(v)


# ---------------------------------------------------------------------------
# Jacobian recursion


def structured_jacobian(grad):
    """The chart Jacobian at the base in complex coordinates
    ``(zeta_1, zetabar_1, ..., zeta_n, zetabar_n)`` up to the factor in the
    second row: rows ``(g, gbar)``, ``(g, -gbar)``, then ``(1, 1)``/``(1, -1)``
    blocks for each remaining coordinate."""
    g = np.asarray(grad, dtype=complex)
    n = len(g)
    M = np.zeros((2 * n, 2 * n), dtype=complex)
    M[0, 0::2] = g
    M[0, 1::2] = np.conj(g)
    M[1, 0::2] = g
    M[1, 1::2] = -np.conj(g)
    for k in range(1, n):
        M[2 * k, 2 * k:2 * k + 2] = (1, 1)
        M[2 * k + 1, 2 * k:2 * k + 2] = (1, -1)
    return M


@dataclass
class RecursionCheck:
    dets: dict
    ratios: dict
    base_value: complex
    expected_base: complex
    max_ratio_error: float
    ok: bool


def jacobian_recursion_check(n_max=6, grad_at=None, tol=1e-12):
    """Determinants of the structured Jacobian for ``n = 1..n_max``.

    ``grad_at(n)`` gives the holomorphic gradient at the base point in C^n
    (default: the unit ball at ``(1, 0, ..., 0)``).
    """
    if not 1 <= n_max <= 6:
        raise ValueError("n_max must lie in 1..6")
    if grad_at is None:
        def grad_at(n):
            g = np.zeros(n, dtype=complex)
            g[0] = 1.0
            return g
    dets = {n: complex(np.linalg.det(structured_jacobian(grad_at(n)))) for n in range(1, n_max + 1)}
    ratios = {n + 1: dets[n + 1] / dets[n] for n in range(1, n_max)}
    g1 = grad_at(1)[0]
    expected = -2 * g1 * np.conj(g1)
    err = max((abs(r + 2) for r in ratios.values()), default=0.0)
    ok = err <= tol and abs(dets[1] - expected) <= tol * max(1.0, abs(expected))
    return RecursionCheck(dets, ratios, dets[1], complex(expected), float(err), bool(ok))


# ---------------------------------------------------------------------------
# inverse chart growth


@dataclass
class GrowthFit:
    order: int
    exponent: float
    distances: np.ndarray
    magnitudes: np.ndarray


def _d_s1(chart, s, m, h):
    """``d^m/ds1^m`` of the inverse chart by central differences."""
    e = np.zeros(s.shape[-1])
    e[0] = 1.0
    if m == 1:
        return (chart.inverse(s + h * e) - chart.inverse(s - h * e)) / (2 * h)
    if m == 2:
        return (chart.inverse(s + h * e) - 2 * chart.inverse(s) + chart.inverse(s - h * e)) / h**2
    raise ValueError("orders 1 and 2 are supported")


def inverse_chart_growth(chart, orders=(1, 2), samples=None, s1_values=None, rng=None):
    """Fit ``|d^m phi^{-1}| ~ d^{-gamma}`` along rays ``s1 -> 0+``.

    ``samples`` are (s2, t) positions of the rays (default: a few seeded
    small offsets).  Returns one fit per order plus the worst deviation of
    ``D phi . D phi^{-1}`` from the identity.
    """
    rng = rng or np.random.default_rng(0)
    n = chart.base.shape[-1]
    if samples is None:
        samples = 0.05 * rng.uniform(-1, 1, (3, 2 * n - 1))
    if s1_values is None:
        s1_values = np.logspace(-1.5, -4, 8)
    fits = []
    worst_identity = 0.0
    for m in orders:
        ds, mags = [], []
        for tail in samples:
            for s1 in s1_values:
                s = np.concatenate([[s1], tail])
                h = min(1e-3, s1 / 4) if m == 2 else min(1e-5, s1 / 8)
                val = _d_s1(chart, s, m, h)
                zeta = chart.inverse(s)
                ds.append(float(chart.domain.signed_distance(zeta)))
                mags.append(float(np.linalg.norm(np.abs(val))))
        ds, mags = np.array(ds), np.array(mags)
        good = mags > 1e-13
        gamma = 0.0
        if good.sum() >= 2:
            gamma = float(np.polyfit(-np.log(ds[good]), np.log(mags[good]), 1)[0])
        fits.append(GrowthFit(m, gamma, ds, mags))
    for tail in samples:
        s = np.concatenate([[s1_values[0]], tail])
        zeta = chart.inverse(s)
        Dphi = chart.jacobian(zeta)
        h = 1e-6
        cols = []
        for k in range(2 * n):
            e = np.zeros(2 * n)
            e[k] = h
            cols.append(_to_real(chart.inverse(s + e) - chart.inverse(s - e)) / (2 * h))
        Dinv = np.stack(cols, axis=-1)
        worst_identity = max(worst_identity, float(np.max(np.abs(Dphi @ Dinv - np.eye(2 * n)))))
    return fits, worst_identity


# ---------------------------------------------------------------------------
# integral lemmas


@dataclass(frozen=True)
class LemmaGrid:
    """Tensor Gauss-Legendre on geometrically graded cells of [0, 1].

    Cell edges are ``ratio^k`` for ``k = 0..cells - 1`` plus 0; each cell
    carries ``points`` nodes (``points3`` in three-dimensional integrals).
    """

    cells: int = 60
    points: int = 4
    points3: int = 3
    ratio: float = 0.5

    def refined(self):
        return LemmaGrid(2 * self.cells, 2 * self.points, 2 * self.points3, self.ratio)

    def coarsened(self):
        return LemmaGrid(self.cells, max(1, self.points - 1), max(1, self.points3 - 1), self.ratio)


@lru_cache(maxsize=None)
def graded_rule(cells, points, ratio):
    edges = np.concatenate([[0.0], ratio ** np.arange(cells - 1, -1, -1.0)])
    x, w = np.polynomial.legendre.leggauss(points)
    a, b = edges[:-1], edges[1:]
    X = (a[:, None] + (b - a)[:, None] * (x + 1) / 2).ravel()
    W = ((b - a)[:, None] * w / 2).ravel()
    return X, W


def _check_delta(delta, upper):
    if not 0 < delta < upper:
        raise DomainRangeError(f"delta must lie in (0, {upper})")


def _integrate2(f, grid):
    X, W = graded_rule(grid.cells, grid.points, grid.ratio)
    S, T = np.meshgrid(X, X, indexing="ij")
    return float(np.sum(np.outer(W, W) * f(S, T)))


def _integrate3(f, grid):
    X, W = graded_rule(grid.cells, grid.points3, grid.ratio)
    S1, S2 = np.meshgrid(X, X, indexing="ij")
    WW = np.outer(W, W)
    total = 0.0
    for t, wt in zip(X, W):  # slice over t to bound memory
        total += wt * float(np.sum(WW * f(S1, S2, t)))
    return total


def _with_check(compute, grid, check, tol=0.05):
    val = compute(grid)
    if check:
        coarse = compute(grid.coarsened())
        if abs(coarse - val) > tol * abs(val):
            warnings.warn(f"lemma grid self-convergence {abs(coarse - val) / abs(val):.1%} exceeds {tol:.0%}",
                          PrecisionWarning, stacklevel=3)
    return val


def lemma31_i(delta, alpha, grid=LemmaGrid(), check=False):
    """``int_0^1 int_0^1 s^{1+a} / (delta + s + t^2)^3 dt ds``."""
    _check_delta(delta, 0.5)
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    f = lambda s, t: s ** (1 + alpha) / (delta + s + t * t) ** 3
    return _with_check(lambda g: _integrate2(f, g), grid, check)


def lemma31_ii(delta, alpha, n=2, grid=LemmaGrid(), check=False):
    """``int s1^{a-1} t^{2n-3} / ((delta+s1+s2+t^2)^3 (delta+s1+s2+t)^{2n-3})`` over [0,1]^3."""
    _check_delta(delta, 0.5)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n < 2:
        raise ValueError("n must be >= 2")

    def f(s1, s2, t):
        a = delta + s1 + s2
        return s1 ** (alpha - 1) * t ** (2 * n - 3) / ((a + t * t) ** 3 * (a + t) ** (2 * n - 3))

    return _with_check(lambda g: _integrate3(f, g), grid, check)


def lemma41(case, delta, alpha=None, n=2, grid=LemmaGrid(), check=False):
    """The three boundary estimates used for ``H_0`` (denominator power n+1).

    i:   int s t^{2n-3} / (delta + s + t^2)^{n+1}
    ii:  int s^{1+a} t^{2n-3} / (delta + s + t^2)^{n+1}
    iii: int s1^{a-1} t^{2n-3} / (delta + s1 + s2 + t^2)^{n+1}
    """
    _check_delta(delta, 1.0)
    if n < 2:
        raise ValueError("n must be >= 2")
    k = n + 1
    if case == "i":
        f = lambda s, t: s * t ** (2 * n - 3) / (delta + s + t * t) ** k
        return _with_check(lambda g: _integrate2(f, g), grid, check)
    if case == "ii":
        if alpha is None or alpha <= 0:
            raise ValueError("case ii needs alpha > 0")
        f = lambda s, t: s ** (1 + alpha) * t ** (2 * n - 3) / (delta + s + t * t) ** k
        return _with_check(lambda g: _integrate2(f, g), grid, check)
    if case == "iii":
        if alpha is None or not 0 < alpha < 1:
            raise ValueError("case iii needs 0 < alpha < 1")
        f = lambda s1, s2, t: s1 ** (alpha - 1) * t ** (2 * n - 3) / (delta + s1 + s2 + t * t) ** k
        return _with_check(lambda g: _integrate3(f, g), grid, check)
    raise ValueError(f"unknown case {case!r}; expected i, ii or iii")


# ---------------------------------------------------------------------------
# sweeps


def delta_sweep(lo=1e-4, hi=1e-1, per_decade=7):
    """Log-spaced deltas with ``per_decade`` intervals per decade."""
    decades = np.log10(hi / lo)
    return np.logspace(np.log10(lo), np.log10(hi), int(round(per_decade * decades)) + 1)


@dataclass
class SweepResult:
    deltas: np.ndarray
    values: np.ndarray
    slope: float
    variation: float  # max / min of values
    log_variation: float  # max / min of values / (1 + |log delta|)
    log_slope: float = 0.0  # log-log slope of values / (1 + |log delta|)


def sweep(fn, deltas=None):
    """Evaluate ``fn(delta)`` on a sweep and fit the log-log slope (OLS)."""
    deltas = delta_sweep() if deltas is None else np.asarray(deltas, dtype=float)
    vals = np.array([fn(d) for d in deltas])
    slope = float(np.polyfit(np.log(deltas), np.log(vals), 1)[0])
    ratio = vals / (1 + np.abs(np.log(deltas)))
    log_slope = float(np.polyfit(np.log(deltas), np.log(ratio), 1)[0])
    return SweepResult(deltas, vals, slope, float(vals.max() / vals.min()), float(ratio.max() / ratio.min()),
                       log_slope)
