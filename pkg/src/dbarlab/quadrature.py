"""Product quadrature over volumes, shells and boundaries of star-shaped domains.

Every rule is a polar product: directions from a rule on the unit sphere
S^{2n-1}, and Gauss-Legendre radial segments whose end points are the
per-direction crossings of signed-distance level sets.  Putting segment ends
exactly on the level sets keeps integrands that are only piecewise smooth
across them (the cutoff profile) at full Gauss accuracy.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import pi

import numpy as np

from .errors import ConstructionError, QuadratureError

CHUNK = 65536


@dataclass
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    level: int
    center: np.ndarray = None
    # holomorphic gradient of rho at boundary nodes (boundary rules only)
    rho_grad: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weights)

    @property
    def measure(self):
        return float(np.sum(self.weights))


@lru_cache(maxsize=None)
def gauss_legendre(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _simplex_rule(dim, m):
    """Collapsed Gauss rule on ``{v >= 0, sum v <= 1}`` in ``dim`` dimensions."""
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = gauss_legendre(m)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    xs = [g.ravel() for g in grids]
    ws = np.prod([g.ravel() for g in wgrids], axis=0)
    pts = np.zeros((xs[0].size, dim))
    rem = np.ones(xs[0].size)
    jac = np.ones(xs[0].size)
    for k in range(dim):
        pts[:, k] = rem * xs[k]
        jac *= rem
        rem = rem * (1.0 - xs[k])
    return pts, ws * jac


@lru_cache(maxsize=None)
def sphere_rule(n, n_simplex, n_phase):
    """Rule on S^{2n-1} in the coordinates ``zeta_j = sqrt(v_j) e^{i a_j}``.

    Surface measure is ``2^{1-n} dv da`` with ``v`` on the simplex, so the
    total is ``2 pi^n / (n-1)!``.
    """
    v, wv = _simplex_rule(n - 1, n_simplex)
    v_full = np.concatenate([v, 1.0 - v.sum(axis=1, keepdims=True)], axis=1)
    v_full = np.clip(v_full, 0.0, 1.0)
    a = 2 * pi * (np.arange(n_phase) + 0.5) / n_phase
    ph = np.stack(np.meshgrid(*([a] * n), indexing="ij"), axis=-1).reshape(-1, n)
    nodes = np.sqrt(v_full)[:, None, :] * np.exp(1j * ph)[None, :, :]
    weights = wv[:, None] * np.full(len(ph), (2 * pi / n_phase) ** n)[None, :] * 2.0 ** (1 - n)
    return nodes.reshape(-1, n), weights.ravel()


def volume_counts(level):
    return 4 + 2 * level, 8 + 4 * level, 4 + 2 * level  # simplex, phase, radial


def boundary_counts(level):
    return 6 * (level + 1), 8 * (level + 1)


def _radial_segments(edges, m):
    """Gauss nodes on consecutive segments; ``edges`` has shape (K+1, D)."""
    x, w = gauss_legendre(m)
    a, b = edges[:-1], edges[1:]
    r = a[:, :, None] + (b - a)[:, :, None] * x
    wr = (b - a)[:, :, None] * w
    return r, wr  # (K, D, m)


def polar_rule(domain, center, levels, level, grade_layers=0, inner_levels=None, kind="volume",
               counts=None):
    """Polar product rule centred at ``center`` over ``{sd < levels[-1]}``.

    ``levels`` are signed-distance values whose crossings become segment
    ends.  ``grade_layers`` geometric layers (ratio 1/2) refine the first
    segment toward ``center``; the innermost layer reaches the centre and is
    integrated, not dropped.  ``inner_levels`` starts the rule at the first
    crossing instead of the centre (shell rules).  ``counts`` overrides
    ``volume_counts(level)``.

    ``meta`` records, per node, the direction index and the radius.
    """
    n = domain.n
    center = np.asarray(center, dtype=complex)
    ns, nph, nr = counts or volume_counts(level)
    dirs, wdir = sphere_rule(n, ns, nph)
    ends = np.stack([domain.ray_exit(center, dirs, lv) for lv in levels])  # (L, D)
    if np.any(~np.isfinite(ends)) or np.any(ends <= 0):
        raise ConstructionError("ray crossing failed; domain is not star-shaped about the centre")
    if inner_levels:
        edges = [domain.ray_exit(center, dirs, lv) for lv in inner_levels]
        edges = np.stack(edges + list(ends))
    else:
        first = ends[0]
        layers = [first * 0.5**k for k in range(grade_layers, 0, -1)]
        edges = np.stack([np.zeros_like(first)] + layers + list(ends))
    r, wr = _radial_segments(edges, nr)
    nodes = center + r[..., None] * dirs[None, :, None, :]
    weights = wr * r ** (2 * n - 1) * wdir[None, :, None]
    dir_index = np.broadcast_to(np.arange(len(dirs))[None, :, None], r.shape)
    meta = {"dirs": dirs, "dir_index": dir_index.ravel(), "radius": r.ravel(), "counts": (ns, nph, nr)}
    return QuadratureRule(nodes.reshape(-1, n), weights.ravel(), kind, level, center=center, meta=meta)


def volume_rule(domain, level, singular_center=None, levels=(0.0,), counts=None):
    """Rule over ``{sd < levels[-1]}`` (default: D itself).

    With ``singular_center`` the polar rule is centred there and graded with
    ``level + 4`` geometric layers, which also cancels the ``|zeta - z|^{1-2n}``
    kernel singularity against the radial Jacobian.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if singular_center is not None:
        c = np.asarray(singular_center, dtype=complex)
        if domain.signed_distance(c) > 0:
            raise QuadratureError("singular centre must lie in the closed domain")
        rule = polar_rule(domain, c, levels, level, grade_layers=level + 4, counts=counts)
        rule.meta["singular"] = True
        return rule
    return polar_rule(domain, np.zeros(domain.n, dtype=complex), levels, level, counts=counts)


def shell_rule(domain, level, breaks=None):
    """Rule over the collar ``{0 <= sd <= delta}``, graded toward ``bD``.

    ``breaks`` are interior signed-distance levels to align segment ends
    with (default: the default cutoff radii ``delta/4`` and ``3 delta/4``).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    d = domain.delta
    if breaks is None:
        breaks = (d / 4.0, 3.0 * d / 4.0)
    g = breaks[0]
    grade = [g * 0.5**k for k in range(min(level, 4), 0, -1)]
    levels = [0.0] + grade + list(breaks) + [d]
    rule = polar_rule(domain, np.zeros(domain.n, dtype=complex), levels[1:], level,
                      inner_levels=[0.0], kind="shell")
    rule.meta["breaks"] = tuple(breaks)
    return rule


def band_rule(domain, center, level, r0, r1, splits=2):
    """Polar rule centred at an interior ``center`` over the band ``{r0 < sd < r1}``.

    Seen from ``center`` a kernel concentrated near the closest point of the
    band has angular width of order one, so the angular resolution does not
    degrade as ``center`` approaches ``bD`` (unlike an origin-centred rule).
    The radial interval is cut into ``splits`` equal signed-distance pieces.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    center = np.asarray(center, dtype=complex)
    if domain.signed_distance(center) >= r0:
        raise QuadratureError("band rule centre must lie inside the inner band surface")
    cuts = list(np.linspace(r0, r1, splits + 1))
    rule = polar_rule(domain, center, cuts[1:], level, inner_levels=[cuts[0]], kind="shell")
    rule.meta["band"] = (r0, r1)
    return rule


def boundary_rule(domain, level):
    """Rule on ``bD`` with surface-measure weights and ``d rho`` at each node."""
    n = domain.n
    ns, nph = boundary_counts(level)
    dirs, wdir = sphere_rule(n, ns, nph)
    R = domain.ray_exit(np.zeros(n, dtype=complex), dirs, 0.0)
    nodes = R[:, None] * dirs
    g = domain.rho_grad(nodes)
    # cone element: dS = R^{2n-1} dsigma / (omega . nu)
    cosang = np.sum((dirs * g).real, axis=-1) / np.linalg.norm(g, axis=-1)
    if np.any(~np.isfinite(R)) or np.any(cosang <= 0):
        raise ConstructionError("boundary is not a radial graph over the sphere")
    weights = wdir * R ** (2 * n - 1) / cosang
    return QuadratureRule(nodes, weights, "boundary", level, rho_grad=g)


def integrate(rule, integrand, threads=1):
    """``sum_k w_k f(x_k)``; ``f`` may return extra trailing axes.

    The sum runs in fixed chunks in fixed order, so results do not depend on
    ``threads``.
    """
    nodes, weights = rule.nodes, rule.weights
    starts = range(0, len(weights), CHUNK)

    def part(s):
        vals = np.asarray(integrand(nodes[s:s + CHUNK]))
        bad = ~np.isfinite(vals)
        if np.any(bad):
            k = int(np.argwhere(bad.reshape(len(vals), -1).any(axis=1))[0, 0])
            raise QuadratureError(f"non-finite integrand at node {nodes[s + k]}")
        return np.tensordot(weights[s:s + CHUNK], vals, axes=(0, 0))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(part, starts))
    else:
        parts = [part(s) for s in starts]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


@dataclass
class ConvergenceReport:
    levels: list
    values: list
    orders: list
    saturated: bool


def self_convergence(rule_family, integrand, levels, rtol_floor=1e-13):
    """Values per level and Richardson order estimates ``log2(|dI_l| / |dI_{l+1}|)``."""
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    vals = [integrate(rule_family(lv), integrand) for lv in levels]
    scale = max(abs(v) for v in vals) or 1.0
    diffs = [abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1)]
    floor = rtol_floor * scale
    orders = []
    saturated = False
    for a, b in zip(diffs[:-1], diffs[1:]):
        if b <= floor or a <= floor:
            saturated = True
            orders.append(float("inf"))
        else:
            orders.append(float(np.log2(a / b)))
    return ConvergenceReport(levels, vals, orders, saturated)
