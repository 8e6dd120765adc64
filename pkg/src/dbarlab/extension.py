"""Cutoff extension ``E phi = chi(sd) phi`` and the commutator ``[dbar, E] phi``."""

from dataclasses import dataclass

import numpy as np

from . import forms as fm
from .errors import DegreeError, UnsupportedInputError


@dataclass(frozen=True)
class CutoffProfile:
    """Quintic step in the signed distance: 1 for ``s <= r0``, 0 for ``s >= r1``.

    The first and second derivatives vanish at both ends, so ``chi`` is C^2.
    """

    r0: float
    r1: float

    def __post_init__(self):
        if not 0 < self.r0 < self.r1:
            raise ValueError(f"need 0 < r0 < r1, got r0={self.r0}, r1={self.r1}")

    @classmethod
    def for_shell(cls, delta):
        return cls(delta / 4.0, 3.0 * delta / 4.0)

    def _x(self, s):
        return np.clip((np.asarray(s, dtype=float) - self.r0) / (self.r1 - self.r0), 0.0, 1.0)

    def chi(self, s):
        x = self._x(s)
        return 1.0 - x**3 * (10.0 - 15.0 * x + 6.0 * x * x)

    def dchi(self, s):
        x = self._x(s)
        return -30.0 * x * x * (1.0 - x) ** 2 / (self.r1 - self.r0)


def _require_ambient(form):
    if getattr(form, "support", "ambient") != "ambient":
        raise UnsupportedInputError("extension needs coefficients defined on all of C^n")


def extend(form, profile, domain):
    """``E phi = chi(signed_distance) * phi`` with exact derivative oracles."""
    _require_ambient(form)
    n = form.n
    chi, dchi = profile.chi, profile.dchi
    sd = domain.signed_distance
    sd_bar = domain.distance_dzbar
    coeffs = {}
    for I, c in form.coeffs.items():

        def val(p, c=c):
            return chi(sd(p)) * c(p)

        d_zb, d_z = [], []
        for j in range(n):

            def dzb(p, c=c, j=j):
                cz = fm.derivative(c, j, bar=True)
                return dchi(sd(p)) * sd_bar(p)[..., j] * c(p) + chi(sd(p)) * cz(p)

            def dz(p, c=c, j=j):
                cz = fm.derivative(c, j, bar=False)
                return dchi(sd(p)) * np.conj(sd_bar(p)[..., j]) * c(p) + chi(sd(p)) * cz(p)

            d_zb.append(fm.Coefficient(dzb, n))
            d_z.append(fm.Coefficient(dz, n))
        coeffs[I] = fm.Coefficient(val, n, d_z=d_z, d_zbar=d_zb)
    return fm.Form(n, form.q, coeffs)


def commutator(form, profile, domain):
    """``[dbar, E] phi = dbar(chi) ^ phi``; supported where ``r0 < sd < r1``."""
    _require_ambient(form)
    n = form.n
    if form.q >= n:
        raise DegreeError("the commutator of a top-degree form has degree n + 1")
    vec = [
        fm.Coefficient(lambda p, j=j: profile.dchi(domain.signed_distance(p)) * domain.distance_dzbar(p)[..., j], n)
        for j in range(n)
    ]
    return fm.wedge_dzbar(n, vec, form)


def commutator_values(form, profile, domain, points):
    """Commutator coefficients at ``points`` in one pass (no per-coefficient closures)."""
    n, q = form.n, form.q
    points = np.asarray(points, dtype=complex)
    out_idx = fm.multi_indices(n, q + 1)
    out = np.zeros(points.shape[:-1] + (len(out_idx),), dtype=complex)
    s = domain.signed_distance(points)
    active = (s > profile.r0) & (s < profile.r1)
    if not np.any(active):
        return out
    p = points[active]
    dchi = profile.dchi(s[active])
    grad = domain.distance_dzbar(p)
    vals = fm.eval_form(form, p)
    pos = {J: k for k, J in enumerate(out_idx)}
    sub = np.zeros((p.shape[0], len(out_idx)), dtype=complex)
    for b, I in enumerate(form.indices):
        for j in range(1, n + 1):
            sign, J = fm.sort_sign((j,) + I)
            if sign:
                sub[:, pos[J]] += sign * dchi * grad[:, j - 1] * vals[:, b]
    out[active] = sub
    return out


def extended_values(form, profile, domain, points):
    """``E phi`` coefficients at ``points``."""
    points = np.asarray(points, dtype=complex)
    chi = profile.chi(domain.signed_distance(points))
    return chi[..., None] * fm.eval_form(form, points)
