"""Finite-difference oracles and the identity-verification suite.

The oracles differentiate in the real coordinates ``z_i = a_i + i b_i`` with
central differences and never look at the closed forms they are checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import HopfModuli, make_moduli, solve_phi, sigma_of, z_function, deck_scale
from .tensors import (
    hat_metric,
    hermitian_det,
    hermitian_eigvalsh,
    lee_form,
    phi_gradient,
    phi_hessian,
    theta_form,
    chi_metric,
    ricci_chi,
    trace_pair,
)

__all__ = [
    "VerificationReport",
    "fd_complex_derivative",
    "fd_complex_hessian",
    "sample_points",
    "axis_points",
    "point_scale",
    "gauduchon_scalar",
    "verify_det_identity",
    "verify_trace_identity",
    "verify_gauduchon",
    "verify_lck",
    "run_suite",
    "PRESETS",
]

PRESETS = {"round": (2.0, 2.0), "asym": (2.0, 4.0), "mid": (1.5, 3.0)}

TOL_ALGEBRAIC = 1e-9
TOL_FD2 = 1e-6
TOL_FD4 = 1e-4
TOL_PSD = 1e-10


@dataclass
class VerificationReport:
    name: str
    samples: int
    max_residual: float
    tolerance: float
    notes: str = ""
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)


# -- finite-difference oracles ------------------------------------------------

def _directions(p, h):
    """Real coordinate directions ``(a1, a2, b1, b2)`` scaled by their steps."""
    p = np.asarray(p, dtype=complex)
    h = np.broadcast_to(np.asarray(h, dtype=float), p.shape)
    dirs = []
    steps = []
    for unit in (1.0, 1j):
        for i in range(2):
            d = np.zeros(p.shape, dtype=complex)
            d[..., i] = unit * h[..., i]
            dirs.append(d)
            steps.append(h[..., i])
    return p, dirs, steps


def _bcast(step, val):
    return step.reshape(step.shape + (1,) * (np.ndim(val) - step.ndim))


def fd_complex_derivative(f, p, h, conjugate: bool = False) -> np.ndarray:
    """``d f / d z_i = (d/da_i - i d/db_i) f / 2`` by central differences.

    ``f`` maps points of shape ``(..., 2)`` to arrays of shape ``(...) + E``;
    the result has shape ``(..., 2) + E``.  ``h`` is a scalar or per-coordinate
    step broadcastable to ``p``.  ``conjugate=True`` returns ``d f / d zbar_i``.
    """
    p, dirs, steps = _directions(p, h)
    d = []
    for d_vec, s in zip(dirs, steps):
        fp, fm = np.asarray(f(p + d_vec)), np.asarray(f(p - d_vec))
        d.append((fp - fm) / (2.0 * _bcast(s, fp)))
    sign = 1j if conjugate else -1j
    grads = [0.5 * (d[i] + sign * d[2 + i]) for i in range(2)]
    return np.stack(grads, axis=p.ndim - 1)


def fd_complex_hessian(f, p, h) -> np.ndarray:
    """Mixed derivatives ``d^2 f / dz_i dzbar_j`` by composed central differences.

    Result shape ``(..., 2, 2) + E``; second order in ``h``.
    """
    p, dirs, steps = _directions(p, h)
    f0 = np.asarray(f(p))
    D = {}
    for c in range(4):
        fp, fm = np.asarray(f(p + dirs[c])), np.asarray(f(p - dirs[c]))
        D[c, c] = (fp - 2.0 * f0 + fm) / _bcast(steps[c], f0) ** 2
    for c in range(4):
        for e in range(c + 1, 4):
            fpp = np.asarray(f(p + dirs[c] + dirs[e]))
            fpm = np.asarray(f(p + dirs[c] - dirs[e]))
            fmp = np.asarray(f(p - dirs[c] + dirs[e]))
            fmm = np.asarray(f(p - dirs[c] - dirs[e]))
            val = (fpp - fpm - fmp + fmm) / (4.0 * _bcast(steps[c], f0) * _bcast(steps[e], f0))
            D[c, e] = D[e, c] = val
    rows = []
    for i in range(2):
        row = []
        for j in range(2):
            ai, aj, bi, bj = i, j, 2 + i, 2 + j
            row.append(0.25 * (D[ai, aj] + D[bi, bj] + 1j * (D[ai, bj] - D[bi, aj])))
        rows.append(np.stack(row, axis=p.ndim - 1))
    return np.stack(rows, axis=p.ndim - 1)


# -- sampling ---------------------------------------------------------------

def sample_points(m: HopfModuli, n: int, seed: int, axis_margin: float = 1e-3) -> np.ndarray:
    """``n`` points with ``log|z_i|`` uniform on ``[-1, 1 + L]`` and uniform phases.

    Points with ``sigma`` within ``axis_margin`` of 0 or 1 are rejected.
    """
    rng = np.random.default_rng(seed)
    out = []
    have = 0
    while have < n:
        logr = rng.uniform(-1.0, 1.0 + m.period_L, size=(2 * n, 2))
        ang = rng.uniform(0.0, 2.0 * np.pi, size=(2 * n, 2))
        p = np.exp(logr) * np.exp(1j * ang)
        s = sigma_of(m, p)
        keep = p[(s > axis_margin) & (s < 1.0 - axis_margin)]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n]


def axis_points(m: HopfModuli) -> np.ndarray:
    """Points on both elliptic curves ``z1 = 0`` and ``z2 = 0``."""
    r = np.exp(np.linspace(-1.0, 1.0 + m.period_L, 5))
    zero = np.zeros_like(r)
    return np.concatenate([np.stack([r, zero], -1), np.stack([zero, r * 1j], -1)]).astype(complex)


def point_scale(m: HopfModuli, p) -> np.ndarray:
    """Per-coordinate length scale ``Phi^k_i`` (``|z_i| <= Phi^k_i``)."""
    phi = np.asarray(solve_phi(m, p), dtype=float)
    return phi[..., None] ** m.k


# -- identity checks --------------------------------------------------------

def _all_points(m, samples, seed, include_axes=True):
    p = sample_points(m, samples, seed)
    if include_axes:
        p = np.concatenate([p, axis_points(m)])
    return p


def verify_det_identity(m: HopfModuli, samples: int = 1000, seed: int = 42,
                        variant: str = "corrected") -> VerificationReport:
    """``det ghat * Phi^2 * Z^3 = 1``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    p = _all_points(m, samples, seed)
    phi = solve_phi(m, p)
    Z = z_function(m, p, phi)
    g = hat_metric(m, p, variant=variant, check=False)
    res = np.max(np.abs(hermitian_det(g) * phi ** 2 * Z ** 3 - 1.0))
    return VerificationReport("det_ghat_identity", len(p), float(res), TOL_ALGEBRAIC)


def verify_trace_identity(m: HopfModuli, samples: int = 1000, seed: int = 42,
                          variant: str = "corrected") -> VerificationReport:
    """``tr_ghat Theta = 1``, axis points included."""
    p = _all_points(m, samples, seed)
    g = hat_metric(m, p, variant=variant, check=False)
    res = np.max(np.abs(trace_pair(g, theta_form(m, p)) - 1.0))
    return VerificationReport("trace_theta_identity", len(p), float(res), TOL_ALGEBRAIC)


def gauduchon_scalar(metric, p, h) -> tuple[np.ndarray, np.ndarray]:
    """``S`` (the single component of ``d dbar omega``) and the sum of the
    magnitudes of its four terms, both from finite differences of ``metric``."""
    D = fd_complex_hessian(metric, p, h)
    terms = [D[..., 0, 0, 1, 1], D[..., 1, 1, 0, 0], -D[..., 0, 1, 1, 0], -D[..., 1, 0, 0, 1]]
    S = sum(terms)
    return S, sum(np.abs(t) for t in terms)


def nongauduchon_control(p) -> np.ndarray:
    """``i e^{|z1|^2} delta_ij dz^i ^ dzbar^j``, whose ``S = (1 + |z1|^2) e^{|z1|^2}``."""
    p = np.asarray(p, dtype=complex)
    w = np.exp(np.abs(p[..., 0]) ** 2)
    return (np.eye(2) * w[..., None, None]).astype(complex)


def verify_gauduchon(m: HopfModuli, samples: int = 100, seed: int = 42, h: float = 5e-4,
                     variant: str = "corrected") -> VerificationReport:
    """Normalized ``|S|`` for ghat with steps ``h * Phi^k_i``.

    The control form's ``|S|`` at the same points and steps is stored in
    ``extra["control_min"]``.
    """
    p = sample_points(m, samples, seed)
    steps = h * point_scale(m, p)
    S, mag = gauduchon_scalar(lambda q: hat_metric(m, q, variant=variant, check=False), p, steps)
    res = np.max(np.abs(S) / mag)
    # control evaluated at unit-scale copies so e^{|z1|^2} stays O(1)
    pc = p / np.abs(p).max(axis=-1, keepdims=True)
    Sc, magc = gauduchon_scalar(nongauduchon_control, pc, h)
    control = np.abs(Sc) / magc
    return VerificationReport("gauduchon", len(p), float(res), TOL_FD4,
                              notes=f"control min normalized |S| = {control.min():.3g}",
                              extra={"control_min": float(control.min())})


def verify_lck(m: HopfModuli, samples: int = 100, seed: int = 42, h: float = 1e-4,
               variant: str = "corrected") -> VerificationReport:
    """Fit ``d ghat = eps theta^(1,0) ^ ghat`` for ``eps`` in ``{+1, -1}``.

    Residuals of ``d_1 ghat_{2 jbar} - d_2 ghat_{1 jbar}`` against
    ``eps (theta_1 ghat_{2 jbar} - theta_2 ghat_{1 jbar})``, normalized by
    ``|theta| |ghat|``.  Raises ``ArithmeticError`` if neither sign fits.
    """
    p = sample_points(m, samples, seed)
    steps = h * point_scale(m, p)
    metric = lambda q: hat_metric(m, q, variant=variant, check=False)  # noqa: E731
    dg = fd_complex_derivative(metric, p, steps)  # [..., k, i, j] = d_k g_{i jbar}
    g = metric(p)
    th = lee_form(m, p)
    lhs = dg[..., 0, 1, :] - dg[..., 1, 0, :]
    rhs = th[..., 0, None] * g[..., 1, :] - th[..., 1, None] * g[..., 0, :]
    scale = (np.linalg.norm(th, axis=-1) * np.linalg.norm(g, axis=(-2, -1)))[..., None]
    fits = {eps: float(np.max(np.abs(lhs - eps * rhs) / scale)) for eps in (1, -1)}
    eps = min(fits, key=fits.get)
    if fits[eps] > TOL_FD2:
        raise ArithmeticError(f"no sign fits the LCK relation: residuals {fits}")
    return VerificationReport("lck", len(p), fits[eps], TOL_FD2,
                              notes=f"eps = {eps:+d}; other sign residual {fits[-eps]:.3g}",
                              extra={"eps": eps})


# -- suite ------------------------------------------------------------------

def _order_report(name, n, res_coarse, res_fine):
    """Observed order from a step-halving pair; needs ``order >= 1.8``."""
    if res_coarse < 1e-9:
        return VerificationReport(name, n, 0.0, 0.2,
                                  notes="truncation error below roundoff; order not measurable")
    order = float(np.log2(res_coarse / res_fine))
    return VerificationReport(name, n, max(0.0, 2.0 - order), 0.2, notes=f"observed order {order:.3f}")


def _fd_errors(m, p, exact, oracle, steps, norm_axes):
    out = []
    for hh in steps:
        fd = oracle(hh * point_scale(m, p))
        scale = np.linalg.norm(exact, axis=norm_axes)
        out.append(float(np.max(np.linalg.norm(fd - exact, axis=norm_axes) / scale)))
    return out


def _report_gradient(m, p, h_acc=1e-4, h_order=1e-3):
    exact = phi_gradient(m, p)
    oracle = lambda s: fd_complex_derivative(lambda q: solve_phi(m, q), p, s)  # noqa: E731
    acc, coarse, fine = _fd_errors(m, p, exact, oracle, (h_acc, h_order, h_order / 2), -1)
    return [
        VerificationReport("phi_gradient_fd", len(p), acc, TOL_FD2, notes=f"h = {h_acc:g} * Phi^k"),
        _order_report("phi_gradient_fd_order", len(p), coarse, fine),
    ]


def _report_hessian(m, p, variant, h_acc=1e-4, h_order=1e-3):
    exact = phi_hessian(m, p, variant)
    oracle = lambda s: fd_complex_hessian(lambda q: solve_phi(m, q), p, s)  # noqa: E731
    acc, coarse, fine = _fd_errors(m, p, exact, oracle, (h_acc, h_order, h_order / 2), (-2, -1))
    return [
        VerificationReport("phi_hessian_fd", len(p), acc, TOL_FD2,
                           notes=f"variant {variant}; h = {h_acc:g} * Phi^k"),
        _order_report("phi_hessian_fd_order", len(p), coarse, fine),
    ]


def _report_printed_discrepancy(p, h0):
    """On the round surface the printed Hessian exceeds the oracle by
    ``conj(z_i) z_j / r^2``; report how well that shape explains the gap."""
    r = make_moduli(2.0, 2.0)
    fd = fd_complex_hessian(lambda q: solve_phi(r, q), p, h0 * point_scale(r, p))
    gap = phi_hessian(r, p, "printed") - fd
    predicted = np.conj(p)[..., :, None] * p[..., None, :] / np.sum(np.abs(p) ** 2, -1)[..., None, None]
    size = np.linalg.norm(gap, axis=(-2, -1))
    res = np.max(np.linalg.norm(gap - predicted, axis=(-2, -1)) / size)
    return VerificationReport("hessian_printed_variant_gap", len(p), float(res), TOL_FD2,
                              notes=f"printed variant misses the round oracle by |gap| >= {size.min():.3g}",
                              extra={"gap_min": float(size.min())})


def run_suite(m: HopfModuli, samples: int = 1000, fd_samples: int = 100, seed: int = 42,
              variant: str = "corrected", gauduchon_h: float = 5e-4) -> list[VerificationReport]:
    """Every identity check for one surface, deterministic in ``seed``."""
    reports = [verify_det_identity(m, samples, seed, variant),
               verify_trace_identity(m, samples, seed, variant)]

    p = _all_points(m, samples, seed)
    phi = solve_phi(m, p)
    Z = z_function(m, p, phi)
    zres = np.max(np.maximum(0.0, np.maximum(2 * m.k1 - Z, Z - 2 * m.k2)))
    reports.append(VerificationReport("z_bounds", len(p), float(zres), 1e-12))

    g = hat_metric(m, p, variant=variant, check=False)
    th = theta_form(m, p)
    gnorm = np.linalg.norm(g, axis=(-2, -1))
    lam = hermitian_eigvalsh(g - th)[..., 0]
    reports.append(VerificationReport("theta_le_ghat", len(p), float(np.max(np.maximum(0, -lam / gnorm))), TOL_PSD))
    ric = 2 * g - 2 * th
    lam = hermitian_eigvalsh(ric)[..., 0]
    reports.append(VerificationReport("ricci_chi_psd", len(p), float(np.max(np.maximum(0, -lam / gnorm))), TOL_PSD))
    reports.append(VerificationReport("ricci_chi_trace", len(p),
                                      float(np.max(np.abs(trace_pair(g, ric) - 2.0))), TOL_ALGEBRAIC))
    chi = chi_metric(m, p)
    reports.append(VerificationReport("det_chi", len(p),
                                      float(np.max(np.abs(hermitian_det(chi) * phi ** 2 - 1))), TOL_ALGEBRAIC))
    detg = hermitian_det(g)
    worst = 0.0
    for t in (0.0, 0.1, 0.25, 0.4, 0.49):
        wt = (1 - 2 * t) * g + 2 * t * th
        worst = max(worst, float(np.max(np.abs(hermitian_det(wt) - (1 - 2 * t) * detg) / detg)))
    reports.append(VerificationReport("reference_det_law", len(p), worst, TOL_ALGEBRAIC,
                                      notes="t in {0, 0.1, 0.25, 0.4, 0.49}"))

    q = deck_scale(m, p)
    gq = hat_metric(m, q, variant=variant, check=False)
    phiq = solve_phi(m, q)
    inv = [
        np.abs(phiq / (m.abs_alpha * m.abs_beta * phi) - 1),
        np.abs(hermitian_det(gq) * phiq ** 2 / (detg * phi ** 2) - 1),
        np.abs(z_function(m, q, phiq) - Z),
        np.abs(trace_pair(gq, theta_form(m, q)) - trace_pair(g, th)),
    ]
    reports.append(VerificationReport("deck_invariance", len(p), float(max(np.max(x) for x in inv)), TOL_ALGEBRAIC))

    pf = sample_points(m, fd_samples, seed + 1)
    reports += _report_gradient(m, pf)
    reports += _report_hessian(m, pf, variant)
    reports.append(_report_printed_discrepancy(sample_points(make_moduli(2.0, 2.0), fd_samples, seed + 2), 1e-4))

    # i d dbar log Phi = ghat - Theta
    fd = fd_complex_hessian(lambda z: np.log(solve_phi(m, z)), pf, 1e-4 * point_scale(m, pf))
    exact = hat_metric(m, pf, variant=variant, check=False) - theta_form(m, pf)
    gn = np.linalg.norm(hat_metric(m, pf, variant=variant, check=False), axis=(-2, -1))
    reports.append(VerificationReport("ddbar_log_phi", len(pf),
                                      float(np.max(np.linalg.norm(fd - exact, axis=(-2, -1)) / gn)), TOL_FD2))

    # dtheta = 0: d_k theta_i symmetric, d_{jbar} theta_i Hermitian
    steps = 1e-4 * point_scale(m, pf)
    dth = fd_complex_derivative(lambda z: lee_form(m, z), pf, steps)
    dbth = fd_complex_derivative(lambda z: lee_form(m, z), pf, steps, conjugate=True)  # [j, i]
    thn = np.linalg.norm(lee_form(m, pf), axis=-1) ** 2
    sym = np.abs(dth[..., 0, 1] - dth[..., 1, 0]) / thn
    herm = np.linalg.norm(dbth - np.conj(np.swapaxes(dbth, -1, -2)), axis=(-2, -1)) / thn
    reports.append(VerificationReport("lee_form_closed", len(pf), float(max(sym.max(), herm.max())), TOL_FD2))

    reports.append(verify_gauduchon(m, fd_samples, seed + 3, gauduchon_h, variant))
    try:
        reports.append(verify_lck(m, fd_samples, seed + 4, variant=variant))
    except ArithmeticError as exc:
        reports.append(VerificationReport("lck", fd_samples, float("inf"), TOL_FD2, notes=str(exc)))
    return reports
