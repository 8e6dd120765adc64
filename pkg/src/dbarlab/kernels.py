"""Leray maps and the Bochner-Martinelli-Koppelman, Cauchy-Fantappie and mixed
kernels.

Kernels are built as vectorized double forms in the generators
``dzbar_k, dzeta_k, dzetabar_k`` (see :mod:`dbarlab.forms`), then reduced to
:class:`KernelTable` contraction coefficients.  For a volume table,

    (integral of Omega ^ phi)_J (z) = sum_I integral K[J, I](z, zeta) phi_I(zeta) dV(zeta)

with ``dV`` Lebesgue measure on C^n = R^2n; the factor relating
``dzeta_1 ^ dzetabar_1 ^ ... ^ dzeta_n ^ dzetabar_n`` to ``dV`` is
``(-2i)^n`` and is folded into ``K``.  Boundary tables are densities against
surface measure.
"""

from dataclasses import dataclass
from math import pi

import numpy as np

from . import forms as fm
from .errors import ConstructionError, SingularityError, StencilError
from .geometry import levi_coefficients


# ---------------------------------------------------------------------------
# Leray maps


class LerayMap:
    """A map ``W(z, zeta)`` holomorphic in ``z`` with support function
    ``Phi = W . (zeta - z)``.

    ``dW_dzetabar(z, zeta)[..., j, k] = dW_j / dzetabar_k``.  The
    z-antiholomorphic derivative is identically zero by construction.
    """

    def __init__(self, n, W, dW_dzetabar, domain=None, name="leray"):
        self.n = n
        self._W = W
        self._dW = dW_dzetabar
        self.domain = domain
        self.name = name

    def __repr__(self):
        return f"LerayMap({self.name}, n={self.n})"

    def W(self, z, zeta):
        return self._W(np.asarray(z, dtype=complex), np.asarray(zeta, dtype=complex))

    def dW_dzetabar(self, z, zeta):
        return self._dW(np.asarray(z, dtype=complex), np.asarray(zeta, dtype=complex))

    def Phi(self, z, zeta):
        z = np.asarray(z, dtype=complex)
        zeta = np.asarray(zeta, dtype=complex)
        return np.sum(self.W(z, zeta) * (zeta - z), axis=-1)

    def is_valid(self, z, zeta):
        """Validity region: ``z`` in D and ``zeta`` in the closed collar outside D."""
        if self.domain is None:
            return np.ones(np.broadcast_shapes(np.shape(z)[:-1], np.shape(zeta)[:-1]), dtype=bool)
        sz = self.domain.signed_distance(z)
        sw = self.domain.signed_distance(zeta)
        return (sz < 0) & (sw >= 0) & (sw <= self.domain.delta)


def leray_ball(n=2, domain=None):
    """``W = conj(zeta)``, so ``Phi = |zeta|^2 - conj(zeta) . z``."""

    def W(z, zeta):
        return np.broadcast_to(np.conj(zeta), np.broadcast_shapes(z.shape, zeta.shape)).copy()

    def dW(z, zeta):
        shape = np.broadcast_shapes(z.shape, zeta.shape)[:-1] + (n, n)
        return np.broadcast_to(np.eye(n, dtype=complex), shape).copy()

    return LerayMap(n, W, dW, domain=domain, name="ball")


def leray_levi(domain, check=True, samples=2000, seed=0, fd_step=1e-5):
    """Leray map from the Levi polynomial: ``W . (zeta - z) = F(z, zeta)``.

    ``W_j = rho_j(zeta) - sum_k a_jk(zeta) (z_k - zeta_k)`` with
    ``a_jk = rho_jk / 2``.  The zeta-bar derivative of ``a_jk`` is taken by
    central differences (it vanishes for quadratic defining functions).
    """
    n = domain.n

    def W(z, zeta):
        a = levi_coefficients(domain, zeta)
        return domain.rho_grad(zeta) - np.einsum("...jk,...k->...j", a, z - zeta)

    def dW(z, zeta):
        _, mixed = domain.rho_hess(zeta)
        out = np.broadcast_to(mixed, np.broadcast_shapes(z.shape, zeta.shape)[:-1] + (n, n)).copy()
        w = z - zeta
        for l in range(n):
            e = np.zeros(n, dtype=complex)
            e[l] = fd_step
            da_dx = (levi_coefficients(domain, zeta + e) - levi_coefficients(domain, zeta - e)) / (2 * fd_step)
            da_dy = (levi_coefficients(domain, zeta + 1j * e) - levi_coefficients(domain, zeta - 1j * e)) / (2 * fd_step)
            da = 0.5 * (da_dx + 1j * da_dy)
            if np.any(da != 0):
                out[..., :, l] -= np.einsum("...jk,...k->...j", da, w)
        return out

    leray = LerayMap(n, W, dW, domain=domain, name="levi")
    if check:
        z, zeta = sample_valid_pairs(domain, samples, np.random.default_rng(seed))
        phi = np.abs(leray.Phi(z, zeta))
        bad = np.flatnonzero(~(phi > 1e-12))
        if bad.size:
            k = bad[0]
            raise ConstructionError(
                f"Levi support function vanishes at z={z[k]}, zeta={zeta[k]} (|Phi|={phi[k]:.3e})"
            )
    return leray


def _unit_directions(rng, count, n):
    v = rng.normal(size=(count, 2 * n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v[:, 0::2] + 1j * v[:, 1::2]


def sample_valid_pairs(domain, count, rng):
    """Seeded pairs with ``z`` in D and ``zeta`` in the collar ``0 <= sd <= delta``."""
    n = domain.n
    d1 = _unit_directions(rng, count, n)
    d2 = _unit_directions(rng, count, n)
    r_exit = domain.ray_exit(np.zeros(n), d1, 0.0)
    z = (r_exit * rng.uniform(0.0, 0.98, count) ** (1.0 / (2 * n)))[:, None] * d1
    lo = domain.ray_exit(np.zeros(n), d2, 0.0)
    hi = domain.ray_exit(np.zeros(n), d2, domain.delta)
    zeta = (lo + (hi - lo) * rng.uniform(0.0, 1.0, count))[:, None] * d2
    return z, zeta


# ---------------------------------------------------------------------------
# kernel double forms


def _cf_const(n):
    return 1.0 / (2j * pi) ** n


def _eta0(z, zeta):
    d = zeta - z
    r2 = np.sum(np.abs(d) ** 2, axis=-1)
    if np.any(r2 == 0):
        raise SingularityError("Bochner-Martinelli kernel evaluated at zeta = z")
    eta = np.conj(d) / r2[..., None]
    deta = (np.eye(d.shape[-1]) / r2[..., None, None]
            - np.conj(d)[..., :, None] * d[..., None, :] / (r2**2)[..., None, None])
    return eta, deta, r2


def _eta1(leray, z, zeta):
    d = zeta - z
    W = leray.W(z, zeta)
    dW = leray.dW_dzetabar(z, zeta)
    Phi = np.sum(W * d, axis=-1)
    if np.any(Phi == 0):
        raise SingularityError("Leray support function vanishes")
    dPhi = np.einsum("...lk,...l->...k", dW, d)
    eta = W / Phi[..., None]
    deta = (dW * Phi[..., None, None] - W[..., :, None] * dPhi[..., None, :]) / (Phi**2)[..., None, None]
    return eta, deta, Phi


def _one_form(n, eta):
    return {fm.gen_dzeta(n, j + 1): eta[..., j] for j in range(n)}


def _dbar_one_form(n, deta_zetabar, deta_zbar=None):
    """``sum_j dbar(eta_j) ^ dzeta_j`` from ``deta[..., j, k] = d eta_j / d(conj)_k``."""
    out = {}
    for j in range(n):
        gj = fm.gen_dzeta(n, j + 1)
        for k in range(n):
            gk = fm.gen_dzetabar(n, k + 1)
            out[gk | gj] = fm._merge_sign(gk, gj) * deta_zetabar[..., j, k]
            if deta_zbar is not None:
                gz = fm.gen_dzbar(n, k + 1)
                out[gz | gj] = fm._merge_sign(gz, gj) * deta_zbar[..., j, k]
    return out


def _power(form, k, n, max_z):
    out = {0: 1.0}
    for _ in range(k):
        out = fm.wedge(out, form, max_z=max_z, nz=n)
    return out


def _broadcast(z, zeta):
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    return z, zeta


def bm_form(n, q, z, zeta):
    """The (0,q)-in-z component of the Bochner-Martinelli-Koppelman kernel."""
    z, zeta = _broadcast(z, zeta)
    if q < 0 or q > n - 1:
        return {}
    eta, deta, _ = _eta0(z, zeta)
    omega = _one_form(n, eta)
    d_omega = _dbar_one_form(n, deta, -deta if q > 0 else None)
    full = fm.wedge(omega, _power(d_omega, n - 1, n, q), max_z=q, nz=n)
    return fm.form_scale(fm.z_degree_part(full, n, q), _cf_const(n))


def leray_form(leray, n, q, z, zeta):
    """The (0,q) component of the Cauchy-Fantappie kernel of ``W``.

    ``W/Phi`` is holomorphic in ``z``, so no dzbar ever appears: every
    component with ``q >= 1`` is identically zero.
    """
    z, zeta = _broadcast(z, zeta)
    if q != 0:
        return {}
    eta, deta, _ = _eta1(leray, z, zeta)
    omega = _one_form(n, eta)
    d_omega = _dbar_one_form(n, deta)
    full = fm.wedge(omega, _power(d_omega, n - 1, n, 0), max_z=0, nz=n)
    return fm.form_scale(full, _cf_const(n))


def mixed_form(leray, n, q, z, zeta):
    """The (0,q) component of the two-section kernel ``Omega^{0,W}``.

    ``c_n omega0 ^ omega1 ^ sum_{i+j=n-2} beta^i ^ (dbar omega1)^j`` with
    ``beta = <dzetabar - dzbar, dzeta> / |zeta - z|^2``.  Zero unless
    ``0 <= q <= n - 2``.
    """
    z, zeta = _broadcast(z, zeta)
    if q < 0 or q > n - 2:
        return {}
    eta0, _, r2 = _eta0(z, zeta)
    eta1, deta1, _ = _eta1(leray, z, zeta)
    front = fm.wedge(_one_form(n, eta0), _one_form(n, eta1))
    beta = {}
    for j in range(n):
        gj = fm.gen_dzeta(n, j + 1)
        gb = fm.gen_dzetabar(n, j + 1)
        gz = fm.gen_dzbar(n, j + 1)
        beta[gb | gj] = fm._merge_sign(gb, gj) / r2
        if q > 0:
            beta[gz | gj] = -fm._merge_sign(gz, gj) / r2
    d1 = _dbar_one_form(n, deta1)
    tail = {}
    for i in range(n - 1):
        term = fm.wedge(_power(beta, i, n, q), _power(d1, n - 2 - i, n, q), max_z=q, nz=n)
        tail = fm.form_add(tail, term)
    full = fm.wedge(front, tail, max_z=q, nz=n)
    return fm.form_scale(fm.z_degree_part(full, n, q), _cf_const(n))


# ---------------------------------------------------------------------------
# tables


@dataclass
class KernelTable:
    """Contraction coefficients ``values[..., J, I]`` for fixed ``(z, zeta)``."""

    n: int
    q_out: int
    q_in: int
    values: np.ndarray
    measure: str = "volume"

    @property
    def out_indices(self):
        return fm.multi_indices(self.n, self.q_out)

    @property
    def in_indices(self):
        return fm.multi_indices(self.n, self.q_in)

    def contract(self, coeffs):
        """``sum_I K[..., J, I] phi[..., I]`` -> ``(..., n_J)``."""
        return np.einsum("...ji,...i->...j", self.values, coeffs)


def form_to_table(form, n, q_out, q_in, shape, measure="volume", rho_grad=None):
    """Reduce a kernel double form to contraction coefficients.

    ``measure="volume"`` pairs with ``dzetabar_I`` of degree ``q_in`` to a
    top form; ``measure="boundary"`` additionally wedges ``d rho`` on the
    left and divides by ``|grad rho|`` so the result is a density against
    surface measure on ``{rho = 0}``.
    """
    J_list = fm.multi_indices(n, q_out)
    I_list = fm.multi_indices(n, q_in)
    vals = np.zeros(shape + (len(J_list), len(I_list)), dtype=complex)
    if not form or not J_list or not I_list:
        return KernelTable(n, q_out, q_in, vals, measure)
    top = fm.zeta_top_mask(n)
    scale = (-2j) ** n
    if measure == "boundary":
        if rho_grad is None:
            raise ValueError("boundary tables need the holomorphic gradient of rho")
        rho_grad = np.asarray(rho_grad, dtype=complex)
        drho = {}
        for j in range(n):
            drho[fm.gen_dzeta(n, j + 1)] = rho_grad[..., j]
            drho[fm.gen_dzetabar(n, j + 1)] = np.conj(rho_grad[..., j])
        form = fm.wedge(drho, form)
        scale = scale * (-1) ** q_out / (2.0 * np.linalg.norm(rho_grad, axis=-1))
    for b, I in enumerate(I_list):
        prod = fm.wedge(form, {fm.dzetabar_mask(n, I): 1.0})
        for a, J in enumerate(J_list):
            c = prod.get(fm.dzbar_mask(n, J) | top)
            if c is not None:
                vals[..., a, b] = c * scale
    return KernelTable(n, q_out, q_in, vals, measure)


def _shape(z, zeta):
    return np.broadcast_shapes(np.shape(z)[:-1], np.shape(zeta)[:-1])


def bm_table(n, q_out, q_in, z, zeta, measure="volume", rho_grad=None):
    """Bochner-Martinelli-Koppelman table ``Omega^0_{0,q_out}`` against ``q_in``-forms."""
    form = bm_form(n, q_out, z, zeta)
    return form_to_table(form, n, q_out, q_in, _shape(z, zeta), measure, rho_grad)


def leray_table(leray, n, q_out, z, zeta, q_in=None, measure="volume", rho_grad=None):
    """Cauchy-Fantappie table; the zero table for ``q_out >= 1``."""
    if q_in is None:
        q_in = q_out + 1
    if q_out == 0:
        Phi = leray.Phi(z, zeta)
        if np.any(Phi == 0):
            raise SingularityError("Leray support function vanishes")
    form = leray_form(leray, n, q_out, z, zeta)
    return form_to_table(form, n, q_out, q_in, _shape(z, zeta), measure, rho_grad)


def mixed_table(leray, n, q_out, z, zeta, q_in=None):
    """Table of ``Omega^{0,W}_{0,q_out}``; pairs with forms of degree ``q_out + 2``."""
    if q_in is None:
        q_in = q_out + 2
    form = mixed_form(leray, n, q_out, z, zeta)
    return form_to_table(form, n, q_out, q_in, _shape(z, zeta))


# ---------------------------------------------------------------------------
# identity and bounds


def _fd_dbar(fn, point, n, h, which, gen):
    """Central-difference antiholomorphic exterior derivative of a double form
    valued function ``fn(point)`` along ``point`` (``which`` is 'zeta' or 'z')."""
    out = {}
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = h
        fpx, fmx = fn(point + e), fn(point - e)
        fpy, fmy = fn(point + 1j * e), fn(point - 1j * e)
        masks = set(fpx) | set(fmx) | set(fpy) | set(fmy)
        deriv = {}
        for m in masks:
            dx = (fpx.get(m, 0.0) - fmx.get(m, 0.0)) / (2 * h)
            dy = (fpy.get(m, 0.0) - fmy.get(m, 0.0)) / (2 * h)
            deriv[m] = 0.5 * (dx + 1j * dy)
        out = fm.form_add(out, fm.wedge({gen(n, k + 1): 1.0}, deriv))
    return out


def homotopy_identity_terms(leray, n, q, z, zeta, h):
    """``(lhs, rhs)`` of ``Omega^0_q - Omega^W_q = dbar_zeta Omega^{0,W}_q + dbar_z Omega^{0,W}_{q-1}``."""
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    d = np.linalg.norm(zeta - z)
    if d <= 4 * h or np.abs(leray.Phi(z, zeta)) <= 1e-3 * max(d, 1.0) * h:
        raise StencilError("finite-difference stencil touches the kernel singularity")
    lhs = fm.form_add(bm_form(n, q, z, zeta), leray_form(leray, n, q, z, zeta), -1.0)
    rhs = _fd_dbar(lambda w: mixed_form(leray, n, q, z, w), zeta, n, h, "zeta", fm.gen_dzetabar)
    rhs = fm.form_add(rhs, _fd_dbar(lambda w: mixed_form(leray, n, q - 1, w, zeta), z, n, h, "z", fm.gen_dzbar))
    return lhs, rhs


def homotopy_identity_residual(leray, n, q, z, zeta, h=1e-4):
    """Max-entry residual of the kernel homotopy identity, relative to the
    largest left-hand-side entry (absolute when that side vanishes)."""
    lhs, rhs = homotopy_identity_terms(leray, n, q, z, zeta, h)
    masks = set(lhs) | set(rhs)
    if not masks:
        return 0.0
    diff = max(float(np.max(np.abs(lhs.get(m, 0.0) - rhs.get(m, 0.0)))) for m in masks)
    scale = max((float(np.max(np.abs(v))) for v in lhs.values()), default=0.0)
    return diff / scale if scale > 0 else diff


@dataclass
class SupportBounds:
    c1: float  # min |Phi| / (d(z) + s1 + |s2| + |t|^2)
    c2: float  # min |Phi| / |z - zeta|^2
    count: int


def support_bound_scan(leray, domain, samples):
    """Fit the constants in the two lower bounds for ``|Phi|``.

    ``samples = (z, zeta)`` with ``z`` in D and ``zeta`` outside; the chart
    is the moving one based at ``z``.
    """
    from .lemma_lab import coord_map

    z, zeta = (np.asarray(a, dtype=complex) for a in samples)
    if np.any(np.all(z == zeta, axis=-1)):
        raise ValueError("support bounds need z != zeta")
    s = coord_map(domain, z, zeta)
    d_z = -domain.signed_distance(z)
    phi = np.abs(leray.Phi(z, zeta))
    denom1 = d_z + s[..., 0] + np.abs(s[..., 1]) + np.sum(s[..., 2:] ** 2, axis=-1)
    denom2 = np.sum(np.abs(z - zeta) ** 2, axis=-1)
    return SupportBounds(float(np.min(phi / denom1)), float(np.min(phi / denom2)), int(phi.size))


def sample_boundary_pairs(domain, base, count, radius, rng):
    """Seeded pairs near the boundary point ``base``: ``z`` in D, ``zeta`` outside."""
    n = domain.n
    base = np.asarray(base, dtype=complex)
    out_z, out_w = [], []
    need = count
    while need > 0:
        m = 4 * need
        a = base + radius * rng.uniform(0, 1, m)[:, None] ** (1 / (2 * n)) * _unit_directions(rng, m, n)
        b = base + radius * rng.uniform(0, 1, m)[:, None] ** (1 / (2 * n)) * _unit_directions(rng, m, n)
        sa, sb = domain.signed_distance(a), domain.signed_distance(b)
        ok = (sa < 0) & (sb > 0) & (sb <= domain.delta)
        out_z.append(a[ok][:need])
        out_w.append(b[ok][:need])
        need -= min(int(ok.sum()), need)
    return np.concatenate(out_z), np.concatenate(out_w)
