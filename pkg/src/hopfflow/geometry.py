"""Moduli of class-1 primary Hopf surfaces, the implicit potential Phi and the
cohomogeneity-one chart ``(u, sigma)``.

Only the moduli ``|alpha|, |beta|`` are stored.  Every tensor built in this
package depends on ``|z1|, |z2|`` alone, so the phases of the deck generators
never enter.

Points of ``C^2 \\ {0}`` are complex arrays whose last axis has length 2; all
functions broadcast over leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModuliError",
    "ConvergenceError",
    "HopfModuli",
    "ReducedCoord",
    "make_moduli",
    "solve_phi",
    "z_function",
    "z_of_sigma",
    "sigma_of",
    "reduced_from_ambient",
    "ambient_from_reduced",
    "deck_scale",
]

# sigma closer than this to 0 or 1 is snapped to the endpoint
ENDPOINT_SNAP = 1e-15


class ModuliError(ValueError):
    """Parameters outside the class-1 moduli ``1 < |alpha| <= |beta|``."""


class ConvergenceError(RuntimeError):
    """The Phi root solve did not converge within its iteration budget."""


@dataclass(frozen=True)
class HopfModuli:
    abs_alpha: float
    abs_beta: float
    k1: float
    k2: float
    period_L: float

    @property
    def k(self) -> np.ndarray:
        return np.array([self.k1, self.k2])

    @property
    def is_round(self) -> bool:
        return self.abs_alpha == self.abs_beta


def make_moduli(abs_alpha: float, abs_beta: float) -> HopfModuli:
    """Build :class:`HopfModuli` from ``|alpha|`` and ``|beta|``.

    Raises
    ------
    ModuliError
        If ``|alpha| <= 1``, ``|alpha| > |beta|`` or an input is not finite.
    """
    a, b = float(abs_alpha), float(abs_beta)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ModuliError(f"moduli must be finite, got ({a}, {b})")
    if a <= 1.0:
        raise ModuliError(f"|alpha| must exceed 1, got {a}")
    if a > b:
        raise ModuliError(f"need |alpha| <= |beta|, got ({a}, {b})")
    la, lb = math.log(a), math.log(b)
    L = la + lb
    k1 = la / L
    return HopfModuli(abs_alpha=a, abs_beta=b, k1=k1, k2=lb / L, period_L=math.log(a * b))


@dataclass(frozen=True)
class ReducedCoord:
    """Cohomogeneity-one coordinates ``u = log Phi`` and ``sigma = |z1|^2 Phi^(-2 k1)``."""

    u: float | np.ndarray
    sigma: float | np.ndarray


def _moduli_sq(p) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p)
    if p.shape[-1] != 2:
        raise ValueError(f"points need a trailing axis of length 2, got shape {p.shape}")
    return np.abs(p[..., 0]) ** 2, np.abs(p[..., 1]) ** 2


def _phi_from_moduli_sq(m: HopfModuli, a2, b2, rtol=1e-14, maxiter=200):
    """Safeguarded Newton for F(s) = a2 s^-2k1 + b2 s^-2k2 - 1 = 0.

    F is smooth and strictly decreasing on s > 0, so a sign-change bracket
    always exists; Newton steps that leave the bracket fall back to bisection.
    """
    a2 = np.asarray(a2, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    a2, b2 = np.broadcast_arrays(a2, b2)
    if np.any((a2 == 0) & (b2 == 0)):
        raise ValueError("Phi is undefined at the origin")
    k1, k2 = m.k1, m.k2

    # terms in log form: no 0 * inf on the axes, no overflow for tiny s
    with np.errstate(divide="ignore"):
        la, lb = np.log(a2), np.log(b2)

    def terms(s):
        ls = np.log(s)
        return np.exp(la - 2 * k1 * ls), np.exp(lb - 2 * k2 * ls)

    def F(s):
        t1, t2 = terms(s)
        return t1 + t2 - 1.0

    def dF(s):
        t1, t2 = terms(s)
        return -(2 * k1 * t1 + 2 * k2 * t2) / s

    s = a2 + b2
    if np.any(~np.isfinite(s) | (s == 0)):
        raise ValueError("|z|^2 is outside the floating-point range")
    lo = s.copy()
    hi = s.copy()
    # F(lo) > 0 > F(hi)
    for _ in range(2100):
        bad = F(lo) <= 0
        if not bad.any():
            break
        lo = np.where(bad, lo * 0.5, lo)
    for _ in range(2100):
        bad = F(hi) >= 0
        if not bad.any():
            break
        hi = np.where(bad, hi * 2.0, hi)
    # exact roots found while bracketing
    f = F(s)
    done = f == 0
    for _ in range(maxiter):
        f = F(s)
        lo = np.where(f > 0, s, lo)
        hi = np.where(f < 0, s, hi)
        step = f / dF(s)
        s_new = s - step
        outside = ~((s_new > lo) & (s_new < hi))
        # geometric midpoint: the bracket can span hundreds of decades
        s_new = np.where(outside, np.sqrt(lo) * np.sqrt(hi), s_new)
        converged = (np.abs(s_new - s) <= rtol * s) | (f == 0)
        s = np.where(done, s, s_new)
        done = done | converged
        if done.all():
            break
    else:
        raise ConvergenceError("Phi solve exceeded its iteration budget")
    # one polishing Newton step lands at full double precision
    f = F(s)
    polished = s - f / dF(s)
    ok = np.isfinite(polished) & (np.abs(F(polished)) <= np.abs(f))
    return np.where(ok, polished, s)


def solve_phi(m: HopfModuli, p) -> np.ndarray:
    """Unique ``Phi > 0`` with ``|z1|^2 Phi^(-2k1) + |z2|^2 Phi^(-2k2) = 1``."""
    a2, b2 = _moduli_sq(p)
    out = _phi_from_moduli_sq(m, a2, b2)
    return out[()] if out.ndim == 0 else out


def sigma_of(m: HopfModuli, p, phi=None):
    """``sigma = |z1|^2 Phi^(-2 k1)``, clamped to ``[0, 1]``."""
    a2, _ = _moduli_sq(p)
    if phi is None:
        phi = solve_phi(m, p)
    s = a2 * np.asarray(phi, dtype=float) ** (-2 * m.k1)
    s = np.clip(s, 0.0, 1.0)
    s = np.where(s < ENDPOINT_SNAP, 0.0, s)
    s = np.where(s > 1.0 - ENDPOINT_SNAP, 1.0, s)
    return s[()] if s.ndim == 0 else s


def z_of_sigma(m: HopfModuli, sigma):
    """``Z`` as a function of ``sigma`` alone: ``2 (k1 sigma + k2 (1 - sigma))``."""
    sigma = np.asarray(sigma, dtype=float)
    return 2.0 * (m.k1 * sigma + m.k2 * (1.0 - sigma))


def z_function(m: HopfModuli, p, phi=None):
    """``Z = 2 (k1 |z1|^2 Phi^(-2k1) + k2 |z2|^2 Phi^(-2k2))``; lies in ``[2 k1, 2 k2]``."""
    a2, b2 = _moduli_sq(p)
    if phi is None:
        phi = solve_phi(m, p)
    phi = np.asarray(phi, dtype=float)
    z = 2.0 * (m.k1 * a2 * phi ** (-2 * m.k1) + m.k2 * b2 * phi ** (-2 * m.k2))
    return z[()] if np.ndim(z) == 0 else z


def reduced_from_ambient(m: HopfModuli, p) -> ReducedCoord:
    phi = solve_phi(m, p)
    return ReducedCoord(u=np.log(phi), sigma=sigma_of(m, p, phi))


def ambient_from_reduced(m: HopfModuli, rc: ReducedCoord) -> np.ndarray:
    """Real, non-negative representative of the torus orbit at ``(u, sigma)``.

    ``log|z1| = k1 u + log(sigma)/2`` and ``log|z2| = k2 u + log(1 - sigma)/2``;
    at ``sigma = 0`` (resp. 1) the vanishing coordinate is exactly zero.
    """
    u = np.asarray(rc.u, dtype=float)
    s = np.asarray(rc.sigma, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("sigma must lie in [0, 1]")
    u, s = np.broadcast_arrays(u, s)
    z1 = np.exp(m.k1 * u) * np.sqrt(s)
    z2 = np.exp(m.k2 * u) * np.sqrt(1.0 - s)
    return np.stack([z1, z2], axis=-1).astype(complex)


def deck_scale(m: HopfModuli, p) -> np.ndarray:
    """``(z1, z2) -> (|alpha| z1, |beta| z2)``; scales Phi by ``|alpha||beta|``."""
    p = np.asarray(p, dtype=complex)
    return p * np.array([m.abs_alpha, m.abs_beta])
