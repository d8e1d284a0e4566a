"""Fused per-point kernels for the reduced flow operator.

Each grid point is computed independently, so results do not depend on
scheduling; reductions happen afterwards in numpy.
"""
import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _at(phi, i, j):
    nu, ns = phi.shape
    i = i % nu
    if j < 0:
        return (3.0 * phi[i, 0] - 3.0 * phi[i, 1]) + phi[i, 2]
    if j >= ns:
        return (3.0 * phi[i, ns - 1] - 3.0 * phi[i, ns - 2]) + phi[i, ns - 3]
    return phi[i, j]


@numba.njit(cache=True)
def frame_metric_kernel(phi, t, du, ds, coef, ghat, theta, G):
    """Fill ``G[c, i, j]`` (c = 11, 12, 22) with ``omega_t + i ddbar phi``.

    ``coef[c, d, j]`` multiplies derivative ``d`` in (uu, us, ss, u, s).
    Returns the number of points where ``G`` is not positive definite.
    """
    nu, ns = phi.shape
    a = 1.0 - 2.0 * t
    b = 2.0 * t
    bad = 0
    for i in range(nu):
        for j in range(ns):
            p0 = phi[i, j]
            pu = _at(phi, i + 1, j)
            mu = _at(phi, i - 1, j)
            ps = _at(phi, i, j + 1)
            ms = _at(phi, i, j - 1)
            d_uu = (pu - 2.0 * p0 + mu) / (du * du)
            d_ss = (ps - 2.0 * p0 + ms) / (ds * ds)
            d_u = (pu - mu) / (2.0 * du)
            d_s = (ps - ms) / (2.0 * ds)
            d_us = (_at(phi, i + 1, j + 1) - _at(phi, i + 1, j - 1)
                    - _at(phi, i - 1, j + 1) + _at(phi, i - 1, j - 1)) / (4.0 * du * ds)
            for c in range(3):
                h = (coef[c, 0, j] * d_uu + coef[c, 1, j] * d_us + coef[c, 2, j] * d_ss
                     + coef[c, 3, j] * d_u + coef[c, 4, j] * d_s)
                G[c, i, j] = (a * ghat[c, j] + b * theta[c, j]) + h
            if not (G[0, i, j] > 0.0 and G[0, i, j] * G[2, i, j] - G[1, i, j] * G[1, i, j] > 0.0):
                bad += 1
    return bad


@numba.njit(cache=True)
def log_det_kernel(G, log_det_chi, out):
    nu, ns = out.shape
    for i in range(nu):
        for j in range(ns):
            out[i, j] = np.log(G[0, i, j] * G[2, i, j] - G[1, i, j] * G[1, i, j]) - log_det_chi[j]


@numba.njit(cache=True)
def spectral_radius_kernel(G, ux, sx, uxx, sxx, du, ds):
    """Gershgorin bound of ``tr_G(i ddbar .)`` on the nine-point stencil."""
    nu = G.shape[1]
    ns = G.shape[2]
    rho = 0.0
    for i in range(nu):
        for j in range(ns):
            g11 = G[0, i, j]
            g12 = G[1, i, j]
            g22 = G[2, i, j]
            det = g11 * g22 - g12 * g12
            i11 = g22 / det
            i12 = -g12 / det
            i22 = g11 / det
            m_uu = (ux[j, 0] * ux[j, 0] * i11 + 2.0 * ux[j, 0] * ux[j, 1] * i12
                    + ux[j, 1] * ux[j, 1] * i22) / 4.0
            m_ss = (sx[j, 0] * sx[j, 0] * i11 + 2.0 * sx[j, 0] * sx[j, 1] * i12
                    + sx[j, 1] * sx[j, 1] * i22) / 4.0
            m_us = (ux[j, 0] * sx[j, 0] * i11 + (ux[j, 0] * sx[j, 1] + ux[j, 1] * sx[j, 0]) * i12
                    + ux[j, 1] * sx[j, 1] * i22) / 4.0
            b_u = (uxx[j, 0, 0] * i11 + 2.0 * uxx[j, 0, 1] * i12 + uxx[j, 1, 1] * i22) / 4.0
            b_s = (sxx[j, 0, 0] * i11 + 2.0 * sxx[j, 0, 1] * i12 + sxx[j, 1, 1] * i22) / 4.0
            r = (4.0 * m_uu / (du * du) + 4.0 * m_ss / (ds * ds) + 2.0 * abs(m_us) / (du * ds)
                 + abs(b_u) / du + 2.0 * abs(b_s) / ds)
            if r > rho:
                rho = r
    return rho
