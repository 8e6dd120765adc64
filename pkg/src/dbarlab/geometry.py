"""Model domains: defining functions with exact derivatives, boundary distance,
the plurisubharmonic rescale and the Levi polynomial.

All evaluators are vectorized over points of shape ``(..., n)`` (complex).
The holomorphic gradient is ``(drho/dzeta_j)_j``; second derivatives come as
``(hh, mixed)`` with ``hh[..., j, k] = d2rho/dzeta_j dzeta_k`` and
``mixed[..., j, k] = d2rho/dzeta_j dzetabar_k``.
"""

import numpy as np

from .errors import ConvergenceError, DomainRangeError

INTERIOR, SHELL, EXTERIOR = "interior", "shell", "exterior"

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50


def _as_points(points, n):
    pts = np.asarray(points, dtype=complex)
    if pts.shape[-1] != n:
        raise ValueError(f"expected points with last axis {n}, got shape {pts.shape}")
    return pts


def to_real(points):
    """(..., n) complex -> (..., 2n) real, interleaved (x1, y1, x2, y2, ...)."""
    pts = np.asarray(points, dtype=complex)
    out = np.empty(pts.shape[:-1] + (2 * pts.shape[-1],))
    out[..., 0::2] = pts.real
    out[..., 1::2] = pts.imag
    return out


def to_complex(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


class Domain:
    """Base class for a bounded domain ``{rho < 0}`` in C^n with a collar of width ``delta``."""

    n: int
    delta: float

    def __init__(self, n, delta=0.25):
        if delta <= 0:
            raise ValueError("shell width delta must be positive")
        self.n = n
        self.delta = float(delta)

    # subclasses provide the raw evaluators
    def _rho(self, pts):
        raise NotImplementedError

    def _grad(self, pts):
        raise NotImplementedError

    def _hess(self, pts):
        raise NotImplementedError

    def signed_distance(self, points):
        raise NotImplementedError

    def distance_dzbar(self, points):
        """``d(signed_distance)/dzetabar_j`` (complex, shape ``(..., n)``)."""
        raise NotImplementedError

    @property
    def box_halfwidth(self):
        raise NotImplementedError

    @property
    def max_radius(self):
        """Radius of a centred ball containing D."""
        raise NotImplementedError

    # -- public evaluators ---------------------------------------------------

    def check_box(self, points):
        pts = _as_points(points, self.n)
        b = self.box_halfwidth
        if np.any(np.abs(pts.real) > b) or np.any(np.abs(pts.imag) > b):
            raise DomainRangeError(f"point outside bounding box [-{b}, {b}]^{2 * self.n}")
        return pts

    def rho(self, points):
        return self._rho(_as_points(points, self.n))

    def rho_grad(self, points):
        return self._grad(_as_points(points, self.n))

    def rho_hess(self, points):
        return self._hess(_as_points(points, self.n))

    def ray_exit(self, center, dirs, level=0.0):
        """Distance ``r > 0`` along unit directions ``dirs`` from ``center``
        at which ``signed_distance`` reaches ``level``.

        ``center`` must satisfy ``signed_distance(center) < level``.  The
        generic version bisects; convex level sets make the crossing unique.
        """
        center = np.asarray(center, dtype=complex)
        dirs = np.asarray(dirs, dtype=complex)
        lo = np.zeros(dirs.shape[:-1])
        hi = np.full(dirs.shape[:-1], np.abs(center).max() * np.sqrt(self.n) + self.max_radius + level + 1.0)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            inside = self.signed_distance(center + mid[..., None] * dirs) < level
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def region(self, points):
        sd = self.signed_distance(points)
        return np.where(sd < 0, INTERIOR, np.where(sd < self.delta, SHELL, EXTERIOR))


class Ellipsoid(Domain):
    """``rho = sum_j c_j |zeta_j|^2 - 1`` with all ``c_j > 0`` (strictly convex)."""

    def __init__(self, weights, delta=0.25):
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("ellipsoid weights must be positive")
        super().__init__(len(weights), delta)
        self.weights = weights
        self._cr = np.repeat(weights, 2)  # per real coordinate

    def __repr__(self):
        return f"Ellipsoid(weights={self.weights.tolist()}, delta={self.delta})"

    @property
    def box_halfwidth(self):
        return 2.0 * (self.max_radius + self.delta)

    @property
    def max_radius(self):
        return float(1.0 / np.sqrt(self.weights.min()))

    def _rho(self, pts):
        return np.sum(self.weights * np.abs(pts) ** 2, axis=-1) - 1.0

    def _grad(self, pts):
        return self.weights * np.conj(pts)

    def _hess(self, pts):
        shape = pts.shape[:-1] + (self.n, self.n)
        hh = np.zeros(shape, dtype=complex)
        mixed = np.broadcast_to(np.diag(self.weights).astype(complex), shape).copy()
        return hh, mixed

    def project(self, points):
        """Nearest boundary point, by safeguarded Newton on the Lagrange multiplier.

        The nearest point is ``x = p / (1 + lam c)`` where ``lam`` solves
        ``g(lam) = sum c p^2 / (1 + lam c)^2 - 1 = 0``.
        """
        p = to_real(_as_points(points, self.n))
        c = self._cr
        cmax, cmin = c.max(), c.min()
        g0 = np.sum(c * p**2, axis=-1) - 1.0
        outside = g0 > 0
        pn = np.linalg.norm(p, axis=-1)
        lo = np.where(outside, 0.0, -1.0 / cmax)
        hi = np.where(outside, pn / np.sqrt(cmin) + 1.0, 0.0)

        # points with no mass on the largest axis may have no interior root
        top = np.isclose(c, cmax)
        degenerate = (~outside) & (np.sum(p[..., top] ** 2, axis=-1) == 0.0)
        if np.any(degenerate):
            eps = 1e-14 / cmax
            lam_e = -1.0 / cmax + eps
            g_e = np.sum(c * p**2 / (1 + lam_e * c) ** 2, axis=-1) - 1.0
            degenerate &= g_e <= 0

        # initial guess by radial scaling, clipped into the bracket
        s = np.sqrt(np.maximum(g0 + 1.0, 1e-300))
        lam = np.clip((s - 1.0) / np.mean(c), lo, hi)
        lam = np.where((lam <= lo) | (lam >= hi), 0.5 * (lo + hi), lam)
        converged = np.zeros(lam.shape, dtype=bool) | degenerate | (g0 == 0)
        lam = np.where(g0 == 0, 0.0, lam)
        for _ in range(NEWTON_MAXIT):
            denom = 1.0 + lam[..., None] * c
            g = np.sum(c * p**2 / denom**2, axis=-1) - 1.0
            dg = -2.0 * np.sum(c**2 * p**2 / denom**3, axis=-1)
            lo = np.where(g > 0, lam, lo)
            hi = np.where(g < 0, lam, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dg != 0, g / dg, 0.0)
            new = lam - step
            bad = ~((new >= lo) & (new <= hi)) | ~np.isfinite(new)
            new = np.where(bad, 0.5 * (lo + hi), new)
            done = np.abs(new - lam) <= NEWTON_TOL * (1.0 + np.abs(lam))
            lam = np.where(converged, lam, new)
            converged |= done | (np.abs(g) <= 1e-14)
            if np.all(converged):
                break
        if not np.all(converged):
            raise ConvergenceError("ellipsoid projection did not converge", last_iterate=lam)
        x = p / (1.0 + lam[..., None] * c)
        if np.any(degenerate):
            # nearest point sits on the largest-weight axes
            others = ~top
            xd = np.where(others, p / (1.0 - c / cmax), 0.0)
            rest = (1.0 - np.sum(c * xd**2, axis=-1)) / cmax
            first_top = np.argmax(top)
            xd[..., first_top] = np.sqrt(np.maximum(rest, 0.0))
            x = np.where(degenerate[..., None], xd, x)
        return to_complex(x)

    def signed_distance(self, points):
        pts = _as_points(points, self.n)
        x = self.project(pts)
        d = np.linalg.norm(to_real(pts - x), axis=-1)
        return np.where(self._rho(pts) < 0, -d, d)

    def distance_dzbar(self, points):
        x = to_real(self.project(points))
        nrm = 2.0 * self._cr * x
        nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
        return 0.5 * (nrm[..., 0::2] + 1j * nrm[..., 1::2])

    def ray_exit(self, center, dirs, level=0.0):
        if level != 0.0:
            return super().ray_exit(center, dirs, level)
        center = np.asarray(center, dtype=complex)
        dirs = np.asarray(dirs, dtype=complex)
        w = self.weights
        A = np.sum(w * np.abs(dirs) ** 2, axis=-1)
        B = np.sum(w * (np.conj(center) * dirs).real, axis=-1)
        C = np.sum(w * np.abs(center) ** 2) - 1.0
        return (-B + np.sqrt(B**2 - A * C)) / A


class Ball(Ellipsoid):
    """The unit ball ``rho = |zeta|^2 - 1`` with exact distance ``|zeta| - 1``."""

    def __init__(self, n=2, delta=0.25):
        super().__init__(np.ones(n), delta)

    def __repr__(self):
        return f"Ball(n={self.n}, delta={self.delta})"

    def project(self, points):
        pts = _as_points(points, self.n)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        return pts / r

    def signed_distance(self, points):
        return np.linalg.norm(_as_points(points, self.n), axis=-1) - 1.0

    def distance_dzbar(self, points):
        pts = _as_points(points, self.n)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        return pts / (2.0 * r)

    def ray_exit(self, center, dirs, level=0.0):
        center = np.asarray(center, dtype=complex)
        dirs = np.asarray(dirs, dtype=complex)
        b = np.sum((np.conj(center) * dirs).real, axis=-1)
        R = 1.0 + level
        return -b + np.sqrt(b**2 - np.sum(np.abs(center) ** 2) + R * R)


class RescaledDomain(Domain):
    """Same domain, defining function ``rho1 = exp(L0 rho0) - 1``."""

    def __init__(self, base, L0):
        if L0 <= 0:
            raise ValueError("L0 must be positive")
        super().__init__(base.n, base.delta)
        self.base = base
        self.L0 = float(L0)

    def __repr__(self):
        return f"RescaledDomain({self.base!r}, L0={self.L0})"

    @property
    def box_halfwidth(self):
        return self.base.box_halfwidth

    @property
    def max_radius(self):
        return self.base.max_radius

    def _rho(self, pts):
        return np.expm1(self.L0 * self.base._rho(pts))

    def _grad(self, pts):
        e = np.exp(self.L0 * self.base._rho(pts))
        return (self.L0 * e)[..., None] * self.base._grad(pts)

    def _hess(self, pts):
        L = self.L0
        e = np.exp(L * self.base._rho(pts))[..., None, None]
        g = self.base._grad(pts)
        hh0, mixed0 = self.base._hess(pts)
        hh = L * e * (hh0 + L * g[..., :, None] * g[..., None, :])
        mixed = L * e * (mixed0 + L * g[..., :, None] * np.conj(g)[..., None, :])
        return hh, mixed

    def signed_distance(self, points):
        return self.base.signed_distance(points)

    def distance_dzbar(self, points):
        return self.base.distance_dzbar(points)

    def ray_exit(self, center, dirs, level=0.0):
        return self.base.ray_exit(center, dirs, level)


def make_domain(kind="ball", n=2, weights=None, delta=0.25):
    if kind == "ball":
        return Ball(n, delta)
    if kind == "ellipsoid":
        if weights is None:
            raise ValueError("ellipsoid needs weights")
        return Ellipsoid(weights, delta)
    raise ValueError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# operations


def rho_jet(domain, point):
    """``(rho, grad, (hh, mixed))`` at ``point`` (checked against the bounding box)."""
    pts = domain.check_box(point)
    return domain.rho(pts), domain.rho_grad(pts), domain.rho_hess(pts)


def signed_distance(domain, point):
    return domain.signed_distance(domain.check_box(point))


def psh_rescale(domain, L0):
    return RescaledDomain(domain, L0)


def region_classify(domain, point):
    return domain.region(point)


def levi_coefficients(domain, zeta):
    """``a_jk(zeta) = (1/2) d2rho/dzeta_j dzeta_k``."""
    hh, _ = domain.rho_hess(zeta)
    return 0.5 * hh


def levi_polynomial(domain, z, zeta):
    """``F(z, zeta) = -sum rho_j (z_j - zeta_j) + sum a_jk (z_j - zeta_j)(z_k - zeta_k)``."""
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    w = z - zeta
    grad = domain.rho_grad(zeta)
    a = levi_coefficients(domain, zeta)
    return -np.sum(grad * w, axis=-1) + np.einsum("...j,...jk,...k->...", w, a, w)


def gradient_floor(domain, points):
    """Minimum of the real gradient norm ``2 |d rho|`` over ``points``."""
    g = domain.rho_grad(points)
    return float(np.min(2.0 * np.linalg.norm(g, axis=-1)))


def levi_lower_constant(domain, z, zeta):
    """Smallest ``C`` with ``2 Re F >= rho(zeta) - rho(z) + |zeta - z|^2 / C`` on the samples."""
    F = levi_polynomial(domain, z, zeta)
    gap = 2.0 * F.real - domain.rho(zeta) + domain.rho(z)
    dist2 = np.sum(np.abs(np.asarray(zeta) - np.asarray(z)) ** 2, axis=-1)
    if np.any(gap <= 0):
        return np.inf
    return float(np.max(dist2 / gap))
