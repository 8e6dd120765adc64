"""(0,q)-forms on C^n, the dbar operator, and a small exterior algebra.

Points are complex arrays of shape ``(..., n)``; coefficient evaluators map
them to arrays of shape ``(...)``.  Multi-indices are 1-based, strictly
increasing tuples, and a form stores one coefficient per sorted ``dzbar_I``.

The exterior algebra (:func:`wedge` and friends) works on *vectorized*
forms: a dict mapping a generator bitmask to an array of coefficients, so a
wedge product is computed for a whole batch of quadrature nodes at once.
"""

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
import sympy as sp

from .errors import ConfigError, DegreeError

H_FD = 1e-5


# ---------------------------------------------------------------------------
# multi-indices


def multi_indices(n, q):
    """All strictly increasing multi-indices of length ``q`` in ``1..n``."""
    if q < 0 or q > n:
        return []
    return list(combinations(range(1, n + 1), q))


def sort_sign(seq):
    """Sort ``seq`` and return ``(sign, sorted_tuple)``.

    ``sign`` is the parity of the sorting permutation, or 0 if ``seq`` has
    a repeated entry (the wedge product then vanishes).
    """
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, None
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


# ---------------------------------------------------------------------------
# vectorized exterior algebra over {dzbar_k, dzeta_k, dzetabar_k}
#
# Generator order: dzbar_1..dzbar_n come first, then the pairs
# dzeta_1, dzetabar_1, dzeta_2, dzetabar_2, ...  With this order the mask of
# ``dzbar_J ^ dzeta_1 ^ dzetabar_1 ^ ... ^ dzeta_n ^ dzetabar_n`` is already
# in normal form, so volume densities are read off without re-sorting.


def gen_dzbar(n, k):
    return 1 << (k - 1)


def gen_dzeta(n, k):
    return 1 << (n + 2 * (k - 1))


def gen_dzetabar(n, k):
    return 1 << (n + 2 * (k - 1) + 1)


def z_mask(n):
    return (1 << n) - 1


def zeta_top_mask(n):
    return ((1 << (2 * n)) - 1) << n


def dzbar_mask(n, J):
    m = 0
    for k in J:
        m |= gen_dzbar(n, k)
    return m


def dzetabar_mask(n, I):
    m = 0
    for k in I:
        m |= gen_dzetabar(n, k)
    return m


@lru_cache(maxsize=None)
def _merge_sign(ma, mb):
    # parity of pairs (i in a, j in b) with i > j
    count = 0
    b = mb
    while b:
        low = b & -b
        count += bin(ma & ~((low << 1) - 1)).count("1")
        b ^= low
    return -1 if count & 1 else 1


def wedge(a, b, max_z=None, nz=None):
    """Wedge product of two vectorized forms.

    ``max_z`` drops terms with more than ``max_z`` dzbar generators (the
    lowest ``nz`` bits); callers use it to keep only the z-degree they need.
    """
    out = {}
    zm = (1 << nz) - 1 if nz is not None else 0
    for ma, ca in a.items():
        for mb, cb in b.items():
            if ma & mb:
                continue
            m = ma | mb
            if max_z is not None and bin(m & zm).count("1") > max_z:
                continue
            term = ca * cb if _merge_sign(ma, mb) > 0 else -(ca * cb)
            if m in out:
                out[m] = out[m] + term
            else:
                out[m] = term
    return out


def form_add(a, b, scale_b=1.0):
    out = dict(a)
    for m, c in b.items():
        out[m] = out[m] + scale_b * c if m in out else scale_b * c
    return out


def form_scale(a, s):
    return {m: s * c for m, c in a.items()}


def z_degree_part(a, n, q):
    """Keep only monomials with exactly ``q`` dzbar generators."""
    zm = z_mask(n)
    return {m: c for m, c in a.items() if bin(m & zm).count("1") == q}


def coefficient(a, mask):
    return a.get(mask, 0.0)


# ---------------------------------------------------------------------------
# coefficient evaluators


def split_points(points):
    points = np.asarray(points, dtype=complex)
    return [points[..., j] for j in range(points.shape[-1])]


class Coefficient:
    """An evaluable function on C^n with optional Wirtinger derivative oracles.

    ``d_z[j]`` and ``d_zbar[j]`` (0-based ``j``) are themselves
    :class:`Coefficient` objects when analytic derivatives are available.
    """

    def __init__(self, func, n, d_z=None, d_zbar=None):
        self.func = func
        self.n = n
        self._d_z = d_z
        self._d_zbar = d_zbar

    def __call__(self, points):
        points = np.asarray(points, dtype=complex)
        val = self.func(points)
        return np.broadcast_to(np.asarray(val, dtype=complex), points.shape[:-1]).copy()

    @property
    def has_derivatives(self):
        return self._d_zbar is not None

    def d_z(self, j):
        return None if self._d_z is None else self._d_z[j]

    def d_zbar(self, j):
        return None if self._d_zbar is None else self._d_zbar[j]

    def __add__(self, other):
        return _combine(self, other, 1.0)

    def __sub__(self, other):
        return _combine(self, other, -1.0)

    def scaled(self, c):
        d_z = None if self._d_z is None else [d.scaled(c) for d in self._d_z]
        d_zb = None if self._d_zbar is None else [d.scaled(c) for d in self._d_zbar]
        f = self.func
        return Coefficient(lambda p: c * f(p), self.n, d_z, d_zb)


def _combine(a, b, s):
    fa, fb = a.func, b.func
    d_z = d_zb = None
    if a.has_derivatives and b.has_derivatives and a._d_z is not None and b._d_z is not None:
        d_z = [_combine(x, y, s) for x, y in zip(a._d_z, b._d_z)]
        d_zb = [_combine(x, y, s) for x, y in zip(a._d_zbar, b._d_zbar)]
    return Coefficient(lambda p: fa(p) + s * fb(p), a.n, d_z, d_zb)


def zsyms(n):
    """Sympy symbols ``(z, zbar)`` treated as independent variables."""
    z = sp.symbols(" ".join(f"z{j}" for j in range(1, n + 1)), seq=True)
    zb = sp.symbols(" ".join(f"zb{j}" for j in range(1, n + 1)), seq=True)
    return tuple(z), tuple(zb)


class SymbolicCoefficient(Coefficient):
    """Coefficient given by a sympy expression in ``z_j`` and ``zb_j``.

    Derivative oracles of every order are produced lazily by symbolic
    differentiation.
    """

    def __init__(self, expr, n):
        self.expr = sp.sympify(expr)
        z, zb = zsyms(n)
        self._syms = (z, zb)
        lam = sp.lambdify(list(z) + list(zb), self.expr, modules="numpy")

        def func(points):
            parts = split_points(points)
            out = lam(*parts, *[np.conj(p) for p in parts])
            return np.broadcast_to(np.asarray(out, dtype=complex), np.shape(parts[0]))

        super().__init__(func, n)
        self._dz_cache = {}
        self._dzb_cache = {}

    @property
    def has_derivatives(self):
        return True

    def d_z(self, j):
        if j not in self._dz_cache:
            self._dz_cache[j] = SymbolicCoefficient(sp.diff(self.expr, self._syms[0][j]), self.n)
        return self._dz_cache[j]

    def d_zbar(self, j):
        if j not in self._dzb_cache:
            self._dzb_cache[j] = SymbolicCoefficient(sp.diff(self.expr, self._syms[1][j]), self.n)
        return self._dzb_cache[j]

    def __add__(self, other):
        if isinstance(other, SymbolicCoefficient):
            return SymbolicCoefficient(self.expr + other.expr, self.n)
        return _combine(self, other, 1.0)

    def __sub__(self, other):
        if isinstance(other, SymbolicCoefficient):
            return SymbolicCoefficient(self.expr - other.expr, self.n)
        return _combine(self, other, -1.0)

    def scaled(self, c):
        return SymbolicCoefficient(c * self.expr, self.n)

    def __repr__(self):
        return f"SymbolicCoefficient({self.expr})"


ScalarField = Coefficient


def field(expr, n):
    """Build a scalar field from a sympy expression, a string, or a callable."""
    if isinstance(expr, Coefficient):
        return expr
    if callable(expr):
        return Coefficient(expr, n)
    return SymbolicCoefficient(expr, n)


def zero_coefficient(n):
    return SymbolicCoefficient(sp.Integer(0), n)


# ---------------------------------------------------------------------------
# finite differences


def fd_wirtinger(func, points, j, h=H_FD, bar=True):
    """Central-difference Wirtinger derivative in coordinate ``j`` (0-based).

    d/dzbar_j = (d/dx_j + i d/dy_j) / 2,  d/dz_j = (d/dx_j - i d/dy_j) / 2.
    """
    points = np.asarray(points, dtype=complex)
    e = np.zeros(points.shape[-1], dtype=complex)
    e[j] = h
    dx = (func(points + e) - func(points - e)) / (2 * h)
    dy = (func(points + 1j * e) - func(points - 1j * e)) / (2 * h)
    return 0.5 * (dx + 1j * dy) if bar else 0.5 * (dx - 1j * dy)


def _fd_coefficient(func, n, j, bar, h):
    return Coefficient(lambda p: fd_wirtinger(func, p, j, h, bar), n)


def derivative(coef, j, bar=True, h=H_FD):
    """Analytic derivative when an oracle exists, central differences otherwise."""
    d = coef.d_zbar(j) if bar else coef.d_z(j)
    if d is not None:
        return d
    return _fd_coefficient(coef, coef.n, j, bar, h)


# ---------------------------------------------------------------------------
# forms


class Form:
    """A (0,q)-form ``sum_I phi_I dzbar_I`` on C^n."""

    def __init__(self, n, q, coeffs=None):
        if not 0 <= q <= n:
            raise DegreeError(f"degree {q} out of range for n={n}")
        self.n = n
        self.q = q
        self.indices = multi_indices(n, q)
        self.coeffs = {}
        for I, c in (coeffs or {}).items():
            I = tuple(I)
            if I not in self.indices:
                raise DegreeError(f"multi-index {I} is not a sorted {q}-index in 1..{n}")
            self.coeffs[I] = field(c, n)

    def __repr__(self):
        terms = ", ".join(f"{I}: {c!r}" for I, c in self.coeffs.items())
        return f"Form(n={self.n}, q={self.q}, {{{terms}}})"

    def coefficient(self, I):
        return self.coeffs.get(tuple(I))

    def __call__(self, points):
        return eval_form(self, points)

    def __add__(self, other):
        if (self.n, self.q) != (other.n, other.q):
            raise DegreeError("cannot add forms of different type")
        out = dict(self.coeffs)
        for I, c in other.coeffs.items():
            out[I] = out[I] + c if I in out else c
        return Form(self.n, self.q, out)

    def scaled(self, c):
        return Form(self.n, self.q, {I: v.scaled(c) for I, v in self.coeffs.items()})

    @property
    def is_symbolic(self):
        return all(isinstance(c, SymbolicCoefficient) for c in self.coeffs.values())


def eval_form(form, points):
    """All C(n,q) coefficients at ``points``; last axis follows ``form.indices``."""
    points = np.asarray(points, dtype=complex)
    out = np.zeros(points.shape[:-1] + (len(form.indices),), dtype=complex)
    for k, I in enumerate(form.indices):
        c = form.coeffs.get(I)
        if c is not None:
            out[..., k] = c(points)
    return out


def zero_form(n, q):
    return Form(n, q, {})


def dbar(form, h=H_FD):
    """The antiholomorphic exterior derivative of a (0,q)-form.

    ``dbar(sum_I f_I dzbar_I) = sum_{I,j} (df_I/dzbar_j) dzbar_j ^ dzbar_I``,
    re-sorted into normal form.  Analytic oracles are used when present.
    """
    n, q = form.n, form.q
    if q >= n:
        raise DegreeError(f"dbar of a ({0},{q})-form on C^{n} has degree {q + 1} > n")
    acc = {}
    for I, c in form.coeffs.items():
        for j in range(1, n + 1):
            sign, J = sort_sign((j,) + I)
            if sign == 0:
                continue
            d = derivative(c, j - 1, bar=True, h=h)
            d = d if sign > 0 else d.scaled(-1.0)
            acc[J] = acc[J] + d if J in acc else d
    return Form(n, q + 1, acc)


def wedge_dzbar(n, vec, form):
    """``(sum_j v_j dzbar_j) ^ form`` for coefficient evaluators ``v_j``."""
    acc = {}
    for I, c in form.coeffs.items():
        for j in range(1, n + 1):
            sign, J = sort_sign((j,) + I)
            if sign == 0 or vec[j - 1] is None:
                continue
            vj, cf = vec[j - 1], c
            term = Coefficient(lambda p, vj=vj, cf=cf, s=sign: s * vj(p) * cf(p), n)
            acc[J] = acc[J] + term if J in acc else term
    return Form(n, form.q + 1, acc)


def is_dbar_closed(form, sample_points, tol=1e-10, h=H_FD):
    """Return ``(closed, max_residual)`` of ``dbar(form)`` over the samples."""
    if form.q == form.n:
        return True, 0.0
    vals = eval_form(dbar(form, h=h), sample_points)
    res = float(np.max(np.abs(vals))) if vals.size else 0.0
    return res <= tol, res


# ---------------------------------------------------------------------------
# test families


def exact_form(g, n):
    """``dbar g`` for a sympy expression ``g`` in ``z_j``, ``zb_j``."""
    z, zb = zsyms(n)
    g = sp.sympify(g)
    coeffs = {}
    for j in range(n):
        d = sp.diff(g, zb[j])
        if d != 0:
            coeffs[(j + 1,)] = SymbolicCoefficient(d, n)
    form = Form(n, 1, coeffs)
    form.generator = g
    return form


FAMILY_KINDS = ("exact_polynomial", "exact_exponential", "nonclosed", "top_degree")


def make_test_family(kind, n):
    """Standard test inputs on C^n (n >= 2)."""
    if kind not in FAMILY_KINDS:
        raise ConfigError(f"unknown test family {kind!r}; expected one of {FAMILY_KINDS}")
    if n < 2:
        raise ConfigError("test families need n >= 2")
    z, zb = zsyms(n)
    if kind == "exact_polynomial":
        gens = [zb[0] * zb[1], zb[0] ** 2, z[0] * zb[1]]
        return [exact_form(g, n) for g in gens]
    if kind == "exact_exponential":
        gens = [sp.exp(zb[0]), z[1] * sp.exp(zb[0]), sp.exp(zb[0] * zb[1] / 2)]
        return [exact_form(g, n) for g in gens]
    if kind == "nonclosed":
        return [
            Form(n, 1, {(1,): SymbolicCoefficient(zb[1], n)}),
            Form(n, 1, {(2,): SymbolicCoefficient(z[0] * zb[0], n)}),
        ]
    top = tuple(range(1, n + 1))
    return [
        Form(n, n, {top: SymbolicCoefficient(1 + zb[0], n)}),
        Form(n, n, {top: SymbolicCoefficient(z[0] * zb[1], n)}),
    ]


def n_components(n, q):
    return comb(n, q)
