"""Monitors evaluated along a flow: volume, ``tr_chi omega``, the Q functional,
the potential bounds, circle lengths and a discrete C^1 norm."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .flow import FlowState, _check_state, _operator

__all__ = [
    "MonitorRecord",
    "TIMESERIES_COLUMNS",
    "total_volume",
    "trace_field_max",
    "q_functional_max",
    "psi_monitors",
    "loop_lengths",
    "c1_norm",
    "min_metric_eigenvalue",
    "monitor_record",
    "closed_form_volume",
]


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    volume: float
    volume_predicted: float
    max_trace_chi_omega: float
    min_metric_eigenvalue: float
    max_psi_dot: float
    max_abs_psi: float
    q_max: float
    loop_length_min: float
    loop_length_max: float
    c1_norm_phi: float

    def as_row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]


TIMESERIES_COLUMNS = tuple(f.name for f in fields(MonitorRecord))


def _metric(state: FlowState):
    _check_state(state)
    op = _operator(state.moduli, state.grid)
    phi_dot, G = op.rhs(state.t, state.phi, with_metric=True)
    return op, G, phi_dot


def closed_form_volume(m) -> float:
    """Volume of ghat: ``pi^2 L / (2 k1 k2)``."""
    return math.pi ** 2 * m.period_L / (2.0 * m.k1 * m.k2)


def _volume(op, G) -> float:
    s = op.sigma
    det = G[0] * G[2] - G[1] ** 2
    # det g e^{2u} = det G / (sigma (1 - sigma)) in the frame
    integrand = det / (s * (1.0 - s)) * op.Z
    return float(2.0 * math.pi ** 2 * integrand.sum() * op.grid.du * op.grid.dsigma)


def total_volume(state: FlowState) -> float:
    """``2 pi^2 int det g e^{2u} Z du dsigma`` by the midpoint rule.

    The prefactor makes the round surface's volume ``2 pi^2 L``.
    """
    op, G, _ = _metric(state)
    return _volume(op, G)


def _trace_chi(op, G):
    s = op.sigma
    return G[0] / s + G[2] / (1.0 - s)


def trace_field_max(state: FlowState) -> float:
    """``max tr_chi omega`` over the grid."""
    op, G, _ = _metric(state)
    return float(_trace_chi(op, G).max())


def _q(op, G, phi, t, A, B):
    s = 1.0 - 2.0 * t
    return _trace_chi(op, G) - A * phi - A * s * (math.log(s) - 1.0) - B * t


def q_functional_max(state: FlowState, A: float = 10.0, B: float = 10.0) -> float:
    """``max (tr_chi omega - A phi - A (1-2t)(log(1-2t) - 1) - B t)``."""
    if A <= 0 or B <= 0:
        raise ValueError("A and B must be positive")
    op, G, _ = _metric(state)
    return float(_q(op, G, state.phi, state.t, A, B).max())


def psi_monitors(state: FlowState, phi_dot=None) -> tuple[float, float]:
    """``(max |psi|, max psi_dot)`` with ``psi = phi + 3 t log Z``."""
    op, _, rhs = _metric(state)
    if phi_dot is None:
        phi_dot = rhs
    logZ = np.log(op.Z)
    psi = state.phi + 3.0 * state.t * logZ
    psi_dot = phi_dot + 3.0 * logZ
    return float(np.abs(psi).max()), float(psi_dot.max())


def _loop_lengths(op, G):
    k1, k2 = op.m.k1, op.m.k2
    # g(v, vbar) for v = (k1 z1, k2 z2), the velocity of the u-curve
    gvv = k1 * k1 * G[0] + 2.0 * k1 * k2 * G[1] + k2 * k2 * G[2]
    rows = np.sqrt(2.0 * gvv).sum(axis=0) * op.grid.du
    return float(rows.min()), float(rows.max())


def loop_lengths(state: FlowState) -> tuple[float, float]:
    """Min and max over ``sigma`` rows of the length of the ``u``-circle."""
    op, G, _ = _metric(state)
    return _loop_lengths(op, G)


def c1_norm(state: FlowState) -> float:
    """``max |phi|`` plus the largest forward-difference quotient in ``u`` or ``sigma``."""
    _check_state(state)
    phi = state.phi
    g = state.grid
    du = np.abs(np.roll(phi, -1, axis=0) - phi).max() / g.du
    ds = np.abs(np.diff(phi, axis=1)).max() / g.dsigma
    return float(np.abs(phi).max() + max(du, ds))


def _min_eig(op, G):
    s = op.sigma
    a = G[0] / s
    c = G[2] / (1.0 - s)
    b = G[1] / np.sqrt(s * (1.0 - s))
    return float(((a + c) / 2.0 - np.hypot((a - c) / 2.0, b)).min())


def min_metric_eigenvalue(state: FlowState) -> float:
    """Smallest eigenvalue of ``g`` relative to ``chi`` over the grid."""
    op, G, _ = _metric(state)
    return _min_eig(op, G)


def monitor_record(state: FlowState, A: float = 10.0, B: float = 10.0, phi_dot=None,
                   volume0: float | None = None) -> MonitorRecord:
    """All monitors at once; ``volume0`` defaults to the current volume."""
    op, G, rhs = _metric(state)
    if phi_dot is None:
        phi_dot = rhs
    vol = _volume(op, G)
    v0 = vol if volume0 is None else volume0
    max_abs_psi, max_psi_dot = psi_monitors(state, phi_dot)
    lmin, lmax = _loop_lengths(op, G)
    return MonitorRecord(
        t=float(state.t),
        volume=vol,
        volume_predicted=float((1.0 - 2.0 * state.t) * v0),
        max_trace_chi_omega=float(_trace_chi(op, G).max()),
        min_metric_eigenvalue=_min_eig(op, G),
        max_psi_dot=max_psi_dot,
        max_abs_psi=max_abs_psi,
        q_max=float(_q(op, G, state.phi, state.t, A, B).max()),
        loop_length_min=lmin,
        loop_length_max=lmax,
        c1_norm_phi=c1_norm(state),
    )
