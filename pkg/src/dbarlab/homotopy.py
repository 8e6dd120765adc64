"""Solution operators for dbar on a strictly pseudoconvex domain.

``H_q phi = u0 + u1`` with

    u0(z) = int_U      Omega^0_{0,q-1}(z, .)    ^ E phi
    u1(z) = int_{U\\D}  Omega^{0,W}_{0,q-1}(z, .) ^ [dbar, E] phi

and ``H_0 f = int_{U\\D} Omega^W_{0,0}(z, .) ^ [dbar, E] f``, where ``E`` is
the cutoff extension and ``U = {signed distance < delta}``.

Finite-difference derivatives of ``u0`` reuse the singular rule centred at
``z`` and shift the data: ``u0(z + h) = int K(w) E phi(z + h + w) dw`` holds
exactly because the BM kernel depends on ``zeta - z`` only.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import extension as ext
from . import forms as fm
from . import kernels as kn
from . import quadrature as qd
from .errors import DegreeError, DomainRangeError, StencilError, UnsupportedInputError

H_FD = fm.H_FD
DEFAULT_LEVEL = 2
BATCH = 200_000


def stencil_offsets(n, h):
    """``+-h e_j`` and ``+-i h e_j``; order is (x+, x-, y+, y-) per coordinate."""
    out = []
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        out += [e, -e, 1j * e, -1j * e]
    return np.array(out)


def dbar_from_stencil(vals, n, q, h):
    """Coefficients of ``dbar u`` from values of the (0,q)-form ``u`` on
    ``[center] + stencil_offsets(n, h)``; ``vals`` has shape (1 + 4n, C(n,q))."""
    in_idx = fm.multi_indices(n, q)
    out_idx = fm.multi_indices(n, q + 1)
    pos = {J: k for k, J in enumerate(out_idx)}
    out = np.zeros(len(out_idx), dtype=complex)
    for j in range(1, n + 1):
        b = 1 + 4 * (j - 1)
        dx = (vals[b] - vals[b + 1]) / (2 * h)
        dy = (vals[b + 2] - vals[b + 3]) / (2 * h)
        d = 0.5 * (dx + 1j * dy)
        for k, I in enumerate(in_idx):
            sign, J = fm.sort_sign((j,) + I)
            if sign:
                out[pos[J]] += sign * d[k]
    return out


class HomotopySolver:
    """Holds the domain, Leray map, cutoff and cached rules for one setting."""

    def __init__(self, domain, leray=None, profile=None, level=DEFAULT_LEVEL, threads=1):
        self.domain = domain
        self.n = domain.n
        if leray is None:
            leray = kn.leray_ball(self.n, domain) if _is_ball(domain) else kn.leray_levi(domain)
        self.leray = leray
        self.profile = profile or ext.CutoffProfile.for_shell(domain.delta)
        if self.profile.r1 > domain.delta:
            raise ValueError("cutoff must vanish inside U")
        self.level = level
        self.threads = threads
        self._shell = {}
        self._dir_tables = {}

    # -- rules --------------------------------------------------------------

    def u0_rule(self, z, level):
        p = self.profile
        return qd.volume_rule(self.domain, level, singular_center=z,
                              levels=(p.r0, p.r1, self.domain.delta))

    def shell_nodes(self, level, z=None):
        """Nodes and weights over the commutator band ``r0 < sd < r1``.

        With ``z`` the rule is polar about ``z`` (accurate near ``bD``);
        without it, the cached origin-centred shell rule is masked to the band.
        """
        if z is not None:
            p = self.profile
            rule = qd.band_rule(self.domain, z, level, p.r0, p.r1)
            return rule, rule.nodes, rule.weights
        if level not in self._shell:
            p = self.profile
            rule = qd.shell_rule(self.domain, level, breaks=(p.r0, p.r1))
            s = self.domain.signed_distance(rule.nodes)
            keep = (s > p.r0) & (s < p.r1)
            self._shell[level] = (rule, rule.nodes[keep], rule.weights[keep])
        return self._shell[level]

    def _check_interior(self, z):
        z = np.asarray(z, dtype=complex)
        if z.shape != (self.n,):
            raise ValueError(f"expected a point in C^{self.n}")
        if self.domain.signed_distance(z) >= 0:
            raise DomainRangeError(f"{z} is not an interior point")
        return z

    # -- operators ----------------------------------------------------------

    def u0(self, form, z, level=None, offsets=None):
        """``u0`` at ``z`` (or at ``z + offsets`` with the rule at ``z``)."""
        level = self.level if level is None else level
        z = self._check_interior(z)
        n, q = self.n, form.q
        if not 1 <= q <= n:
            raise DegreeError("u0 needs 1 <= q <= n")
        offs = np.zeros((1, n), dtype=complex) if offsets is None else np.asarray(offsets, dtype=complex)
        out = np.zeros((len(offs), fm.n_components(n, q - 1)), dtype=complex)
        rule = self.u0_rule(z, level)
        w = rule.nodes - z
        if not form.coeffs:
            return out if offsets is not None else out[0]
        # BM kernel is homogeneous of degree 1 - 2n: tabulate on directions once
        dir_tab = self._direction_table(rule, q)
        scale = rule.weights * rule.meta["radius"] ** (1 - 2 * n)
        chunk = max(1024, BATCH // len(offs))
        for s in range(0, len(w), chunk):
            sl = slice(s, s + chunk)
            tab = dir_tab[rule.meta["dir_index"][sl]]
            pts = z + offs[:, None, :] + w[None, sl]
            data = ext.extended_values(form, self.profile, self.domain, pts)
            vals = np.einsum("mji,kmi->kmj", tab, data)
            if not np.all(np.isfinite(vals)):
                k = int(np.argwhere(~np.isfinite(vals))[0, 0])
                _check_finite(vals[k], pts[k])
            out += np.einsum("m,kmj->kj", scale[sl], vals)
        return out if offsets is not None else out[0]

    def _direction_table(self, rule, q):
        key = (rule.meta["counts"], q)
        if key not in self._dir_tables:
            n = self.n
            self._dir_tables[key] = kn.bm_table(n, q - 1, q, np.zeros(n, dtype=complex), rule.meta["dirs"]).values
        return self._dir_tables[key]

    def u1(self, form, z, level=None, offsets=None):
        level = self.level if level is None else level
        z = self._check_interior(z)
        n, q = self.n, form.q
        if not 1 <= q <= n:
            raise DegreeError("u1 needs 1 <= q <= n")
        offs = np.zeros((1, n), dtype=complex) if offsets is None else np.asarray(offsets, dtype=complex)
        out = np.zeros((len(offs), fm.n_components(n, q - 1)), dtype=complex)
        if q - 1 > n - 2 or not form.coeffs:
            return out if offsets is not None else out[0]
        _, nodes, weights = self.shell_nodes(level, z)
        data = ext.commutator_values(form, self.profile, self.domain, nodes)
        out[:] = self._shell_contract(
            lambda zz: kn.mixed_table(self.leray, n, q - 1, zz, nodes[None]), z + offs, data, weights)
        return out if offsets is not None else out[0]

    def _shell_contract(self, table_fn, zs, data, weights):
        """``sum_k w_k K(z, zeta_k) data_k`` for each row of ``zs``, batched
        so that at most ``BATCH`` kernel entries are live at once."""
        step = max(1, BATCH // max(len(weights), 1))
        res = []
        for s in range(0, len(zs), step):
            table = table_fn(zs[s:s + step, None, :])
            vals = table.contract(data[None])
            if not np.all(np.isfinite(vals)):
                k = int(np.argwhere(~np.isfinite(vals))[0, 0])
                _check_finite(vals[k], np.broadcast_to(zs[s + k], (vals.shape[1], self.n)))
            res.append(np.einsum("m,kmj->kj", weights, vals))
        return np.concatenate(res)

    def h_q(self, form, z, level=None, offsets=None):
        return self.u0(form, z, level, offsets) + self.u1(form, z, level, offsets)

    def h0(self, f, z, level=None, offsets=None):
        """``H_0 f`` for a function ``f`` (a (0,0)-form or a scalar field)."""
        level = self.level if level is None else level
        z = self._check_interior(z)
        form = _as_function(f, self.n)
        offs = np.zeros((1, self.n), dtype=complex) if offsets is None else np.asarray(offsets, dtype=complex)
        out = np.zeros(len(offs), dtype=complex)
        if form.coeffs:
            _, nodes, weights = self.shell_nodes(level, z)
            data = ext.commutator_values(form, self.profile, self.domain, nodes)
            vals = self._shell_contract(
                lambda zz: kn.leray_table(self.leray, self.n, 0, zz, nodes[None], q_in=1), z + offs, data, weights)
            out[:] = vals[:, 0]
        return out if offsets is not None else out[0]

    def operator(self, form, z, level=None, offsets=None):
        """``H_q form`` for any degree; a 0-form goes to ``H_0``."""
        if form.q == 0:
            v = self.h0(form, z, level, offsets)
            return v[..., None]
        return self.h_q(form, z, level, offsets)

    # -- derived quantities -------------------------------------------------

    def fd_step(self, z, h_fd=H_FD):
        d = -self.domain.signed_distance(z)
        h = min(h_fd, d / 8.0)
        if h <= 0:
            raise StencilError("stencil centre is not interior")
        return h

    def dbar_solution(self, form, z, level=None, h_fd=H_FD):
        """``dbar (H_q form)`` at ``z`` by central differences."""
        z = self._check_interior(z)
        h = self.fd_step(z, h_fd)
        offs = np.concatenate([np.zeros((1, self.n)), stencil_offsets(self.n, h)])
        if np.any(self.domain.signed_distance(z + offs) >= 0):
            raise StencilError("finite-difference stencil leaves D")
        vals = self.operator(form, z, level, offs)
        return dbar_from_stencil(vals, self.n, max(form.q - 1, 0), h)

    def homotopy_residual(self, form, z, level=None, h_fd=H_FD, closed=None):
        """``phi - dbar H_q phi - H_{q+1} dbar phi`` at ``z`` (per component)."""
        z = self._check_interior(z)
        n, q = self.n, form.q
        if not 1 <= q <= n:
            raise DegreeError("homotopy residual needs 1 <= q <= n")
        phi = fm.eval_form(form, z[None])[0]
        if not form.coeffs:
            return np.zeros_like(phi)
        res = phi - self.dbar_solution(form, z, level, h_fd)
        if q < n:
            if closed is None:
                closed = getattr(form, "generator", None) is not None
            if not closed:
                res = res - self.h_q(fm.dbar(form), z, level)
        return res

    def h0_identity_residual(self, f, z, level=None):
        """``f - H_0 f - H_1 dbar f`` at ``z``."""
        z = self._check_interior(z)
        form = _as_function(f, self.n)
        val = fm.eval_form(form, z[None])[0, 0]
        return val - self.h0(form, z, level) - self.h_q(fm.dbar(form), z, level)[0]

    def evaluate(self, form, points, level=None):
        """``H_q form`` at many points (concurrent over points)."""
        points = np.atleast_2d(np.asarray(points, dtype=complex))

        def one(p):
            return self.operator(form, p, level)

        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                return np.array(list(ex.map(one, points)))
        return np.array([one(p) for p in points])


class SolutionField:
    """``H_q phi`` as an evaluable field.

    ``stencil(x, offsets)`` returns values at ``x + offsets`` computed from
    rules centred at ``x``; this is what the norm and blow-up code uses.
    """

    def __init__(self, solver, form, level=None):
        self.solver = solver
        self.form = form
        self.level = solver.level if level is None else level
        self.n = solver.n

    def stencil(self, x, offsets):
        return self.solver.operator(self.form, x, self.level, offsets)

    def __call__(self, points):
        return self.solver.evaluate(self.form, points, self.level)


def _is_ball(domain):
    from .geometry import Ball
    return isinstance(domain, Ball)


def _as_function(f, n):
    if isinstance(f, fm.Form):
        if f.q != 0:
            raise DegreeError("H_0 takes functions")
        return f
    return fm.Form(n, 0, {(): f})


def _check_finite(vals, pts):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argwhere(bad.reshape(len(vals), -1).any(axis=1))[0, 0])
        from .errors import QuadratureError
        raise QuadratureError(f"non-finite integrand at node {pts[k]}")


# ---------------------------------------------------------------------------
# reproducing check


def bm_reproduce(f, z, level=4, domain=None):
    """Boundary BM integral of a holomorphic function ``f``; equals ``f(z)``."""
    from .geometry import Ball

    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    domain = domain or Ball(n)
    if domain.signed_distance(z) >= 0:
        raise DomainRangeError(f"{z} is not an interior point")
    f = fm.field(f, n) if not callable(f) else f
    rule = qd.boundary_rule(domain, level)
    table = kn.bm_table(n, 0, 0, z, rule.nodes, measure="boundary", rho_grad=rule.rho_grad)
    vals = table.values[..., 0, 0] * f(rule.nodes)
    _check_finite(vals, rule.nodes)
    return complex(rule.weights @ vals)


# ---------------------------------------------------------------------------
# solve


@dataclass
class ResidualRecord:
    point: np.ndarray
    levels: list
    residuals: list  # max-abs residual per level


@dataclass
class SolveReport:
    n: int
    q: int
    points: np.ndarray
    values: np.ndarray  # u at points, final level
    records: list
    levels: list
    wall_time: float
    solver: HomotopySolver = None
    norms: dict = field(default_factory=dict)

    def u(self, level=None):
        """The solution ``H_q phi`` as a field (final level by default)."""
        return SolutionField(self.solver, self.form, self.levels[-1] if level is None else level)

    @property
    def max_residual(self):
        return max((r.residuals[-1] for r in self.records), default=0.0)

    def trajectory(self):
        return [max(r.residuals[k] for r in self.records) for k in range(len(self.levels))] \
            if self.records else [0.0] * len(self.levels)


def _closedness(form, points):
    if form.q == form.n:
        return True, 0.0
    if form.is_symbolic:
        return fm.is_dbar_closed(form, points, tol=1e-10)
    return fm.is_dbar_closed(form, points, tol=1e-6)


def solve(form, points, levels=(1, 2), domain=None, solver=None, h_fd=H_FD, norms=None):
    """Evaluate ``u = H_q phi`` at ``points`` and record the residual of
    ``dbar u = phi`` at each level in ``levels``."""
    t0 = time.perf_counter()
    if solver is None:
        from .geometry import Ball
        solver = HomotopySolver(domain or Ball(form.n))
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    if not 1 <= form.q <= form.n:
        raise DegreeError("solve needs a (0,q)-form with 1 <= q <= n")
    ok, res = _closedness(form, points)
    if not ok:
        raise UnsupportedInputError(f"input is not dbar-closed (residual {res:.3e})")
    levels = list(levels)
    records = [ResidualRecord(p, levels, []) for p in points]
    values = None
    for lv in levels:
        vals = []
        for rec in records:
            r = solver.homotopy_residual(form, rec.point, lv, h_fd, closed=True)
            rec.residuals.append(float(np.max(np.abs(r))) if r.size else 0.0)
        if lv == levels[-1]:
            vals = solver.evaluate(form, points, lv)
        values = vals
    report = SolveReport(form.n, form.q, points, values, records, levels,
                         time.perf_counter() - t0, solver)
    report.form = form
    if norms:
        from . import sobolev
        report.norms = sobolev.norm_summary(report, norms)
    return report


def solve_top_degree(form, level=DEFAULT_LEVEL, points=None, domain=None, solver=None, h_fd=H_FD):
    """Solve ``dbar u = phi`` for a (0,n)-form.

    ``phi`` is cut off to a compactly supported form on U, which is
    automatically closed, and ``u`` is its BM volume potential.
    """
    if form.q != form.n:
        raise DegreeError("solve_top_degree needs a (0,n)-form")
    if points is None:
        points = default_points(form.n, 5, seed=0)
    return solve(form, points, levels=[max(level - 1, 0), level], domain=domain, solver=solver, h_fd=h_fd)


def default_points(n, count, seed=0, radius=0.6):
    """Seeded interior sample points of the unit ball (``|z| <= radius``)."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(count, 2 * n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= radius * rng.uniform(0, 1, (count, 1)) ** (1 / (2 * n))
    return pts[:, 0::2] + 1j * pts[:, 1::2]
