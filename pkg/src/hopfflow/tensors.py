"""Closed-form tensors of the Gauduchon-Ornea LCK metrics.

A Hermitian form ``h = i h_{i jbar} dz^i ^ dzbar^j`` is stored as a complex
array of shape ``(..., 2, 2)`` with ``H[..., i, j] = h_{i jbar}``.  Gradients
``(f_1, f_2)`` with ``f_i = d f / d z_i`` have shape ``(..., 2)``.
"""
from __future__ import annotations

import numpy as np

from .geometry import HopfModuli, solve_phi, z_function

__all__ = [
    "PositivityError",
    "hermitian_det",
    "hermitian_eigvalsh",
    "is_positive_definite",
    "trace_pair",
    "phi_gradient",
    "phi_hessian",
    "hat_metric",
    "theta_form",
    "chi_metric",
    "ricci_chi",
    "reference_metric",
    "lee_form",
]

HESSIAN_VARIANTS = ("corrected", "printed")


class PositivityError(ArithmeticError):
    """A tensor expected to be positive definite is not."""


def hermitian_det(h) -> np.ndarray:
    h = np.asarray(h)
    d = h[..., 0, 0].real * h[..., 1, 1].real - np.abs(h[..., 0, 1]) ** 2
    return d


def hermitian_eigvalsh(h) -> np.ndarray:
    """Ascending eigenvalues, shape ``(..., 2)``."""
    return np.linalg.eigvalsh(np.asarray(h, dtype=complex))


def is_positive_definite(h) -> np.ndarray:
    h = np.asarray(h)
    return (h[..., 0, 0].real > 0) & (hermitian_det(h) > 0)


def trace_pair(a, b) -> np.ndarray:
    """``tr_a b = a^{i jbar} b_{i jbar}`` for positive definite ``a``.

    Equals ``2 (a ^ b) / a^2`` for (1,1)-forms on a surface.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    det = hermitian_det(a)
    if np.any(det <= 0) or np.any(a[..., 0, 0].real <= 0):
        raise PositivityError("trace_pair needs a positive definite first argument")
    num = (a[..., 1, 1] * b[..., 0, 0] + a[..., 0, 0] * b[..., 1, 1]
           - a[..., 0, 1] * b[..., 1, 0] - a[..., 1, 0] * b[..., 0, 1])
    return num.real / det


def _phi_z(m: HopfModuli, p):
    p = np.asarray(p, dtype=complex)
    phi = np.asarray(solve_phi(m, p), dtype=float)
    return p, phi, np.asarray(z_function(m, p, phi), dtype=float)


def phi_gradient(m: HopfModuli, p) -> np.ndarray:
    """``Phi_i = conj(z_i) Phi^(1 - 2 k_i) / Z``."""
    p, phi, Z = _phi_z(m, p)
    k = m.k
    return np.conj(p) * phi[..., None] ** (1.0 - 2.0 * k) / Z[..., None]


def phi_hessian(m: HopfModuli, p, variant: str = "corrected") -> np.ndarray:
    """Complex Hessian ``Phi_{i jbar}``.

    ``variant="corrected"`` weights the sum ``sum_a k_a^2 |z_a|^2 Phi^(-2 k_a)``
    with squared ``k_a``, which reproduces ``Phi = r^2`` on the round surface.
    ``variant="printed"`` uses unsquared ``k_a``; it is kept only so the
    verification suite can show that it fails.
    """
    if variant not in HESSIAN_VARIANTS:
        raise ValueError(f"unknown Hessian variant {variant!r}")
    p, phi, Z = _phi_z(m, p)
    k = m.k
    grad = np.conj(p) * phi[..., None] ** (1.0 - 2.0 * k) / Z[..., None]
    weights = k ** 2 if variant == "corrected" else k
    s = np.sum(weights * np.abs(p) ** 2 * phi[..., None] ** (-2.0 * k), axis=-1)
    coeff = (1.0 - 2.0 * k[:, None] - 2.0 * k[None, :]) + (4.0 / Z * s)[..., None, None]
    outer = grad[..., :, None] * np.conj(grad)[..., None, :]
    diag = phi[..., None] ** (1.0 - 2.0 * k) / Z[..., None]
    return np.eye(2) * diag[..., None, :] + coeff * outer / phi[..., None, None]


def hat_metric(m: HopfModuli, p, variant: str = "corrected", check: bool = True) -> np.ndarray:
    """The LCK metric ``ghat_{i jbar} = Phi_{i jbar} / Phi``."""
    p = np.asarray(p, dtype=complex)
    phi = np.asarray(solve_phi(m, p), dtype=float)
    g = phi_hessian(m, p, variant) / phi[..., None, None]
    if check and not np.all(is_positive_definite(g)):
        raise PositivityError("ghat failed to be positive definite")
    return g


def lee_form(m: HopfModuli, p) -> np.ndarray:
    """(1,0)-part of the Lee form, ``theta_i = Phi_i / Phi``."""
    phi = np.asarray(solve_phi(m, p), dtype=float)
    return phi_gradient(m, p) / phi[..., None]


def theta_form(m: HopfModuli, p) -> np.ndarray:
    """Rank-one form ``Theta_{i jbar} = Phi_i conj(Phi_j) / Phi^2``."""
    th = lee_form(m, p)
    return th[..., :, None] * np.conj(th)[..., None, :]


def chi_metric(m: HopfModuli, p) -> np.ndarray:
    """Diagonal metric ``chi_{i jbar} = Phi^(-2 k_i) delta_ij`` with ``det chi = Phi^-2``."""
    phi = np.asarray(solve_phi(m, p), dtype=float)
    d = phi[..., None] ** (-2.0 * m.k)
    return (np.eye(2) * d[..., None, :]).astype(complex)


def ricci_chi(m: HopfModuli, p) -> np.ndarray:
    """Chern-Ricci form of chi, ``2 ghat - 2 Theta``."""
    return 2.0 * hat_metric(m, p) - 2.0 * theta_form(m, p)


def reference_metric(m: HopfModuli, t: float, p) -> np.ndarray:
    """``omega_t = (1 - 2t) ghat + 2t Theta`` for ``0 <= t < 1/2``."""
    if not 0.0 <= t < 0.5:
        raise ValueError(f"reference metrics exist for 0 <= t < 1/2, got t={t}")
    return (1.0 - 2.0 * t) * hat_metric(m, p) + 2.0 * t * theta_form(m, p)
