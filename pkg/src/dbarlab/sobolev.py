"""Weighted and unweighted Sobolev norms and boundary blow-up fits.

Derivatives are taken in the 2n real coordinates ``x_1, y_1, ..., x_n, y_n``.
Fields are anything evaluable at points:

* a Form (normed coefficient-wise),
* a callable ``f(points) -> values``,
* an object with ``stencil(x, offsets)`` returning values at ``x + offsets``
  (used for solution operators, which are expensive to evaluate).
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement, product
from math import comb

import numpy as np

from . import forms as fm
from .errors import StencilError

H_MAX = 1e-4
FLOOR = 1e-13


@dataclass(frozen=True)
class NormSpec:
    k: int
    p: float
    mu: float = None
    scheme: str = "fd"  # or "analytic"
    h_max: float = H_MAX

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise ValueError("k must be a nonnegative integer")
        if not 1 < self.p < np.inf:
            raise ValueError("p must lie in (1, inf)")
        if self.mu is not None and not 0 < self.mu < 1:
            raise ValueError("mu must lie in (0, 1)")
        if self.scheme not in ("fd", "analytic"):
            raise ValueError("scheme is 'fd' or 'analytic'")

    @property
    def max_order(self):
        return self.k + 1 if self.mu is not None else self.k


def real_multi_indices(n, order):
    """All ``alpha`` in N^{2n} with ``|alpha| == order``, as count tuples."""
    out = []
    for combo in combinations_with_replacement(range(2 * n), order):
        a = [0] * (2 * n)
        for c in combo:
            a[c] += 1
        out.append(tuple(a))
    return out


def _fd_weights(m):
    """Centred m-th difference: offsets ``(j - m/2)`` and weights ``(-1)^{m-j} C(m, j)``."""
    return [(j - m / 2.0, (-1) ** (m - j) * comb(m, j)) for j in range(m + 1)]


def _alpha_stencil(alpha, h):
    """Real-coordinate offsets and weights approximating ``d^alpha`` to O(h^2)."""
    per = [_fd_weights(m) for m in alpha]
    pts, wts = [], []
    for terms in product(*per):
        off = np.array([t[0] for t in terms]) * h
        w = np.prod([t[1] for t in terms]) / h ** sum(alpha)
        pts.append(off)
        wts.append(w)
    return np.array(pts), np.array(wts)


def _to_complex_offsets(x):
    return x[..., 0::2] + 1j * x[..., 1::2]


def _stencil_eval(u, x, offsets):
    """Values of ``u`` at ``x + offsets`` with a trailing component axis."""
    if hasattr(u, "stencil"):
        return np.asarray(u.stencil(x, offsets))
    pts = x + offsets
    if isinstance(u, fm.Form):
        return fm.eval_form(u, pts)
    vals = np.asarray(u(pts))
    return vals[..., None] if vals.ndim == 1 else vals


def fd_derivatives(u, x, alphas, h):
    """``{alpha: d^alpha u(x)}`` from one shared stencil evaluation."""
    stencils = {a: _alpha_stencil(a, h) for a in alphas}
    keys = {}
    offs = []
    for a, (pts, _) in stencils.items():
        for p in pts:
            key = tuple(np.round(p / h * 2).astype(int))
            if key not in keys:
                keys[key] = len(offs)
                offs.append(p)
    vals = _stencil_eval(u, x, _to_complex_offsets(np.array(offs)))
    out = {}
    for a, (pts, wts) in stencils.items():
        idx = [keys[tuple(np.round(p / h * 2).astype(int))] for p in pts]
        out[a] = np.tensordot(wts, vals[idx], axes=(0, 0))
    return out


def _batched_fd(u, points, alphas, hs, chunk=4096):
    """``fd_derivatives`` for plain fields: all nodes and offsets in one call.

    Offsets scale linearly with the per-node step, so the unit stencil is
    shared and each weight picks up ``h^{-|alpha|}``.
    """
    stencils = {a: _alpha_stencil(a, 1.0) for a in alphas}
    keys, offs = {}, []
    for pts, _ in stencils.values():
        for p in pts:
            key = tuple(np.round(p * 2).astype(int))
            if key not in keys:
                keys[key] = len(offs)
                offs.append(p)
    unit = _to_complex_offsets(np.array(offs))
    out = {a: [] for a in alphas}
    for s in range(0, len(points), chunk):
        x, h = points[s:s + chunk], hs[s:s + chunk]
        pts = x[:, None, :] + h[:, None, None] * unit[None]
        vals = fm.eval_form(u, pts) if isinstance(u, fm.Form) else np.asarray(u(pts))[..., None]
        for a, (pts, wts) in stencils.items():
            idx = [keys[tuple(np.round(p * 2).astype(int))] for p in pts]
            scale = h ** -float(sum(a))
            out[a].append(np.einsum("s,nsc->nc", wts, vals[:, idx]) * scale[:, None])
    return {a: np.concatenate(v) for a, v in out.items()}


def _coeff_list(u):
    if isinstance(u, fm.Form):
        return [u.coeffs.get(I, fm.zero_coefficient(u.n)) for I in u.indices]
    return [u]


def _real_derivative(coef, axis):
    j, imag = divmod(axis, 2)
    dz = fm.derivative(coef, j, bar=False)
    dzb = fm.derivative(coef, j, bar=True)
    if imag:
        return (dz - dzb).scaled(1j)
    return dz + dzb


def analytic_derivatives(u, points, alphas):
    """``{alpha: values (..., C)}`` via derivative oracles of each coefficient."""
    coeffs = _coeff_list(u)
    if not all(isinstance(c, fm.Coefficient) for c in coeffs):
        raise TypeError("analytic scheme needs Coefficient or Form input")
    out = {}
    for a in alphas:
        cols = []
        for c in coeffs:
            d = c
            for axis, m in enumerate(a):
                for _ in range(m):
                    d = _real_derivative(d, axis)
            cols.append(d(points))
        out[a] = np.stack(cols, axis=-1)
    return out


def fd_step(d, h_max=H_MAX):
    return np.minimum(h_max, d / 8.0)


def derivative_terms(u, points, orders, domain, scheme="fd", h_max=H_MAX):
    """``{alpha: values (N, C)}`` for every real multi-index with ``|alpha|`` in ``orders``."""
    n = domain.n
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    alphas = [a for m in orders for a in real_multi_indices(n, m)]
    if scheme == "analytic":
        return analytic_derivatives(u, points, alphas)
    d = -domain.signed_distance(points)
    if np.any(d <= 0):
        raise StencilError("norm nodes must be interior")
    hs = fd_step(d, h_max)
    reach = max(orders) / 2.0 * np.sqrt(2 * n)
    if np.any(reach * hs >= d):
        raise StencilError("derivative stencil crosses the boundary")
    if not hasattr(u, "stencil"):
        return _batched_fd(u, points, alphas, hs)
    rows = [fd_derivatives(u, x, alphas, h) for x, h in zip(points, hs)]
    return {a: np.array([r[a] for r in rows]) for a in alphas}


def _norm_sum(terms, weights, p):
    total = 0.0
    for vals in terms.values():
        vals = vals.reshape(len(weights), -1)
        for c in range(vals.shape[1]):
            total += float(np.sum(weights * np.abs(vals[:, c]) ** p)) ** (1.0 / p)
    return total


def weighted_norm(u, spec, rule, domain):
    """``sum_{|alpha| <= k+1} (int_D |d^alpha u|^p d^{(1-mu)p})^{1/p}``, summed over components."""
    if spec.mu is None:
        raise ValueError("weighted_norm needs mu")
    d = -domain.signed_distance(rule.nodes)
    if np.any(d <= 0):
        raise StencilError("rule has nodes on or outside the boundary")
    terms = derivative_terms(u, rule.nodes, range(spec.k + 2), domain, spec.scheme, spec.h_max)
    w = rule.weights * d ** ((1.0 - spec.mu) * spec.p)
    return _norm_sum(terms, w, spec.p)


def sobolev_norm(u, k, p, rule, domain, scheme="fd", h_max=H_MAX):
    """``sum_{|alpha| <= k} ||d^alpha u||_{L^p(D)}``."""
    spec = NormSpec(k, p, None, scheme, h_max)
    terms = derivative_terms(u, rule.nodes, range(k + 1), domain, spec.scheme, h_max)
    return _norm_sum(terms, rule.weights, p)


# ---------------------------------------------------------------------------
# blow-up fits


@dataclass
class BlowupFit:
    gamma: float
    distances: np.ndarray
    magnitudes: np.ndarray
    floored: bool


def derivative_magnitude(u, x, m, domain, h_max=H_MAX):
    """Euclidean norm of all order-``m`` real derivatives of all components."""
    terms = derivative_terms(u, x[None], [m], domain, "fd", h_max)
    return float(np.sqrt(sum(np.sum(np.abs(v) ** 2) for v in terms.values())))


def ray_points(domain, anchor, target, distances):
    """Points on the segment ``anchor -> target`` at the given boundary distances."""
    anchor = np.asarray(anchor, dtype=complex)
    target = np.asarray(target, dtype=complex)
    out = []
    for dist in distances:
        lo, hi = 0.0, 1.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            s = -domain.signed_distance(anchor + mid * (target - anchor))
            lo, hi = (mid, hi) if s > dist else (lo, mid)
        out.append(anchor + lo * (target - anchor))
    return np.array(out)


def blowup_exponent(u, ray, radii, domain, m=1, h_max=H_MAX):
    """Least-squares ``gamma`` with ``|d^m u| ~ d^{-gamma}`` along ``ray``.

    ``ray = (anchor, boundary_point)``; ``radii`` are boundary distances.
    """
    radii = np.asarray(radii, dtype=float)
    if np.log10(radii.max() / radii.min()) < 1.5 - 1e-12:
        raise ValueError("radii must span at least 1.5 decades")
    pts = ray_points(domain, ray[0], ray[1], radii)
    d = -domain.signed_distance(pts)
    mags = np.array([derivative_magnitude(u, x, m, domain, h_max) for x in pts])
    if np.any(mags < FLOOR):
        return BlowupFit(0.0, d, mags, True)
    slope = np.polyfit(-np.log(d), np.log(mags), 1)[0]
    return BlowupFit(float(slope), d, mags, False)


def norm_summary(report, norms):
    """Norms of a solve report's solution for each ``NormSpec`` in ``norms``."""
    from . import quadrature as qd

    solver = report.solver
    out = {}
    for spec in norms:
        rule = qd.volume_rule(solver.domain, report.levels[-1])
        u = report.u()
        if spec.mu is None:
            val = sobolev_norm(u, spec.k, spec.p, rule, solver.domain)
        else:
            val = weighted_norm(u, spec, rule, solver.domain)
        out[f"k={spec.k},p={spec.p},mu={spec.mu}"] = val
    return out
