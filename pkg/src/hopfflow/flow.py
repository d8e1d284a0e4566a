"""Chern-Ricci flow of torus-invariant potentials on the ``(u, sigma)`` cylinder.

The potential ``phi`` solves

    d phi / dt = log det(omega_t + i ddbar phi) - log det chi,
    omega_t = (1 - 2t) ghat + 2t Theta,

on ``u in R / L Z`` (periodic) times ``sigma in [0, 1]`` (cell centred).

Internally every Hermitian form is written in the frame ``e_i = z_i d/dz_i``
at the real positive representative of each torus orbit, where
``G_ij = z_i zbar_j g_{i jbar}``.  In that frame ghat, Theta, chi and the
complex Hessian of an invariant function are real symmetric 2x2 matrices that
depend on ``sigma`` only, and ``det g / det chi = det G / (sigma (1 - sigma))``.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .geometry import HopfModuli, ReducedCoord, ambient_from_reduced, z_of_sigma

__all__ = [
    "GridSpec",
    "FlowState",
    "InitialData",
    "FlowControl",
    "FlowResult",
    "PositivityFailure",
    "InadmissibleInitialData",
    "FlowAborted",
    "ChartJacobians",
    "chart_jacobians",
    "ReducedFlow",
    "reduced_complex_hessian",
    "assemble_evolving_metric",
    "flow_rhs",
    "step_rk4",
    "run_flow",
    "exact_round_potential",
    "make_initial_potential",
    "read_snapshot",
    "write_snapshot",
]


class PositivityFailure(ArithmeticError):
    """The evolving metric stopped being positive definite somewhere on the grid."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class InadmissibleInitialData(ValueError):
    """``ghat + i ddbar psi`` is not positive at some grid point."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class FlowAborted(RuntimeError):
    """Unrecoverable positivity failure; ``partial`` holds the run so far."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class GridSpec:
    n_u: int
    n_sigma: int
    period_L: float

    def __post_init__(self):
        if self.n_u < 8 or self.n_sigma < 8:
            raise ValueError(f"grid needs n_u, n_sigma >= 8, got {self.n_u} x {self.n_sigma}")
        if not self.period_L > 0:
            raise ValueError("period_L must be positive")

    @classmethod
    def for_moduli(cls, m: HopfModuli, n_u: int = 64, n_sigma: int = 64) -> "GridSpec":
        return cls(int(n_u), int(n_sigma), m.period_L)

    @property
    def du(self) -> float:
        return self.period_L / self.n_u

    @property
    def dsigma(self) -> float:
        return 1.0 / self.n_sigma

    @property
    def u(self) -> np.ndarray:
        return np.arange(self.n_u) * self.du

    @property
    def sigma(self) -> np.ndarray:
        return (np.arange(self.n_sigma) + 0.5) / self.n_sigma

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_u, self.n_sigma)


@dataclass(frozen=True)
class FlowState:
    moduli: HopfModuli
    grid: GridSpec
    t: float
    phi: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class InitialData:
    family: str = "zero"
    epsilon: float = 0.0
    path: str | None = None

    def __post_init__(self):
        if self.family not in ("zero", "cos-bump", "file"):
            raise ValueError(f"unknown initial data family {self.family!r}")
        if self.family == "file" and not self.path:
            raise ValueError("file initial data needs a path")


@dataclass
class FlowControl:
    t_max: float = 0.49
    cfl: float = 0.2
    monitor_cadence: float = 0.01
    A: float = 10.0
    B: float = 10.0
    max_retries: int = 12
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.t_max < 0.5:
            raise ValueError(f"t_max must lie in (0, 1/2), got {self.t_max}")
        if self.cfl <= 0 or self.monitor_cadence <= 0:
            raise ValueError("cfl and monitor_cadence must be positive")


@dataclass
class FlowResult:
    records: list
    state: FlowState
    termination: str
    steps: int = 0
    rejected: int = 0
    snapshots: list = field(default_factory=list)


# -- chart ------------------------------------------------------------------

@dataclass(frozen=True)
class ChartJacobians:
    """Derivatives of ``(u, sigma)`` with respect to ``x = (log|z1|, log|z2|)``."""

    du_dx: np.ndarray         # (..., 2)
    dsigma_dx: np.ndarray     # (..., 2)
    d2u_dx2: np.ndarray       # (..., 2, 2)
    d2sigma_dx2: np.ndarray   # (..., 2, 2)


def chart_jacobians(m: HopfModuli, rc: ReducedCoord | float | np.ndarray) -> ChartJacobians:
    """First and second derivatives of the chart at ``sigma in (0, 1)``.

    Every entry depends on ``sigma`` only; ``rc`` may be a :class:`ReducedCoord`
    or the ``sigma`` values themselves.
    """
    s = np.asarray(rc.sigma if isinstance(rc, ReducedCoord) else rc, dtype=float)
    if np.any((s <= 0) | (s >= 1)):
        raise ValueError("chart derivatives need sigma strictly inside (0, 1)")
    k1, k2 = m.k1, m.k2
    Z = z_of_sigma(m, s)
    dZ = 2.0 * (k1 - k2)
    w = np.array([k2, -k1])
    f = 4.0 * s * (1.0 - s) / Z
    df = 4.0 * (1.0 - 2.0 * s) / Z - 4.0 * s * (1.0 - s) * dZ / Z ** 2
    du = np.stack([2.0 * s / Z, 2.0 * (1.0 - s) / Z], axis=-1)
    ds = f[..., None] * w
    # u_i and sigma_i are functions of sigma alone, so d/dx_j = (d/dsigma) * sigma_j
    du_ds = np.stack([4.0 * k2 / Z ** 2, -4.0 * k1 / Z ** 2], axis=-1)
    d2u = du_ds[..., :, None] * ds[..., None, :]
    d2s = (df * f)[..., None, None] * (w[:, None] * w[None, :])
    return ChartJacobians(du, ds, d2u, d2s)


# -- discrete operator --------------------------------------------------------

def _frame_reference(m: HopfModuli, s):
    """Frame components of ``ghat - Theta`` and ``Theta``, each ``(11, 12, 22)``."""
    Z = z_of_sigma(m, s)
    c = 4.0 * s * (1.0 - s) / Z ** 3
    ddbar_u = (c * m.k2 ** 2, -c * m.k1 * m.k2, c * m.k1 ** 2)
    theta = (s ** 2 / Z ** 2, s * (1.0 - s) / Z ** 2, (1.0 - s) ** 2 / Z ** 2)
    return ddbar_u, theta


class ReducedFlow:
    """Precomputed per-``sigma`` coefficients for one surface and grid."""

    def __init__(self, m: HopfModuli, grid: GridSpec):
        if abs(grid.period_L - m.period_L) > 1e-12 * m.period_L:
            raise ValueError("grid period does not match the moduli")
        self.m = m
        self.grid = grid
        s = grid.sigma
        self.sigma = s
        self.Z = z_of_sigma(m, s)
        self.log_det_chi = np.log(s * (1.0 - s))
        J = chart_jacobians(m, s)
        self.jac = J
        uu, ss = J.du_dx, J.dsigma_dx
        # frame Hessian F_ij = sum_d coef[d][ij] * D_d, D = (uu, us, ss, u, s)
        self._coef = []
        for i, j in ((0, 0), (0, 1), (1, 1)):
            self._coef.append((
                uu[:, i] * uu[:, j] / 4.0,
                (uu[:, i] * ss[:, j] + ss[:, i] * uu[:, j]) / 4.0,
                ss[:, i] * ss[:, j] / 4.0,
                J.d2u_dx2[:, i, j] / 4.0,
                J.d2sigma_dx2[:, i, j] / 4.0,
            ))
        self.ddbar_u, self.theta = _frame_reference(m, s)
        self.ghat = tuple(a + b for a, b in zip(self.ddbar_u, self.theta))
        self._pad = np.empty((grid.n_u + 2, grid.n_sigma + 2))
        self._coef_arr = np.ascontiguousarray(np.array(self._coef))
        self._ghat_arr = np.ascontiguousarray(np.array(self.ghat))
        self._theta_arr = np.ascontiguousarray(np.array(self.theta))

    # stencils
    def derivatives(self, phi: np.ndarray):
        """``(phi_uu, phi_us, phi_ss, phi_u, phi_s)`` by second-order central
        differences; periodic in ``u``, quadratic extrapolation ghosts in ``sigma``."""
        P = self._pad
        P[1:-1, 1:-1] = phi
        P[1:-1, 0] = (3.0 * phi[:, 0] - 3.0 * phi[:, 1]) + phi[:, 2]
        P[1:-1, -1] = (3.0 * phi[:, -1] - 3.0 * phi[:, -2]) + phi[:, -3]
        P[0, :] = P[-2, :]
        P[-1, :] = P[1, :]
        du, ds = self.grid.du, self.grid.dsigma
        up, um = P[2:, 1:-1], P[:-2, 1:-1]
        sp, sm = P[1:-1, 2:], P[1:-1, :-2]
        d_uu = (up - 2.0 * phi + um) / du ** 2
        d_ss = (sp - 2.0 * phi + sm) / ds ** 2
        d_u = (up - um) / (2.0 * du)
        d_s = (sp - sm) / (2.0 * ds)
        d_us = (P[2:, 2:] - P[2:, :-2] - P[:-2, 2:] + P[:-2, :-2]) / (4.0 * du * ds)
        return d_uu, d_us, d_ss, d_u, d_s

    def frame_hessian(self, phi: np.ndarray):
        """Frame components ``(11, 12, 22)`` of ``i ddbar phi``."""
        D = self.derivatives(phi)
        out = []
        for coef in self._coef:
            acc = coef[0] * D[0]
            for c, d in zip(coef[1:], D[1:]):
                acc = acc + c * d
            out.append(acc)
        return tuple(out)

    def reference(self, t: float):
        a = 1.0 - 2.0 * t
        return tuple(a * g + 2.0 * t * th for g, th in zip(self.ghat, self.theta))

    def frame_metric_reference(self, t: float, phi: np.ndarray):
        """Frame components of ``omega_t + i ddbar phi`` (plain numpy)."""
        H = self.frame_hessian(phi)
        R = self.reference(t)
        return tuple(r + h for r, h in zip(R, H))

    def frame_metric(self, t: float, phi: np.ndarray):
        """Same as :meth:`frame_metric_reference`, through the fused kernel."""
        return self._frame_metric(t, phi)[0]

    def _frame_metric(self, t, phi):
        G = np.empty((3,) + phi.shape)
        bad = _kernels.frame_metric_kernel(np.ascontiguousarray(phi, dtype=float), float(t),
                                     self.grid.du, self.grid.dsigma,
                                     self._coef_arr, self._ghat_arr, self._theta_arr, G)
        return G, bad

    @staticmethod
    def _check(G, what="metric"):
        g11, g12, g22 = G
        det = g11 * g22 - g12 * g12
        bad = ~((g11 > 0) & (det > 0))
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise PositivityFailure(f"{what} not positive definite at grid index {idx}", idx)
        return det

    def rhs(self, t: float, phi: np.ndarray, with_metric: bool = False):
        G, bad = self._frame_metric(t, phi)
        if bad:
            self._check(G)
        out = np.empty(phi.shape)
        _kernels.log_det_kernel(G, self.log_det_chi, out)
        return (out, G) if with_metric else out

    def rhs_reference(self, t: float, phi: np.ndarray):
        det = self._check(self.frame_metric_reference(t, phi))
        return np.log(det) - self.log_det_chi

    def spectral_radius(self, G) -> float:
        """Gershgorin bound for the linearised operator ``tr_G(i ddbar .)``,
        drift terms included."""
        J = self.jac
        return float(_kernels.spectral_radius_kernel(
            np.asarray(G), J.du_dx, J.dsigma_dx, J.d2u_dx2, J.d2sigma_dx2,
            self.grid.du, self.grid.dsigma))

    def spectral_radius_reference(self, G) -> float:
        g11, g12, g22 = G
        det = g11 * g22 - g12 * g12
        i11, i12, i22 = g22 / det, -g12 / det, g11 / det
        J = self.jac
        ux, sx = J.du_dx, J.dsigma_dx

        def quad(a, b):
            return (a[:, 0] * b[:, 0] * i11 + (a[:, 0] * b[:, 1] + a[:, 1] * b[:, 0]) * i12
                    + a[:, 1] * b[:, 1] * i22) / 4.0

        M_uu, M_us, M_ss = quad(ux, ux), quad(ux, sx), quad(sx, sx)
        b_u = (J.d2u_dx2[:, 0, 0] * i11 + 2 * J.d2u_dx2[:, 0, 1] * i12 + J.d2u_dx2[:, 1, 1] * i22) / 4.0
        b_s = (J.d2sigma_dx2[:, 0, 0] * i11 + 2 * J.d2sigma_dx2[:, 0, 1] * i12
               + J.d2sigma_dx2[:, 1, 1] * i22) / 4.0
        du, ds = self.grid.du, self.grid.dsigma
        rho = (4.0 * M_uu / du ** 2 + 4.0 * M_ss / ds ** 2 + 2.0 * np.abs(M_us) / (du * ds)
               + np.abs(b_u) / du + 2.0 * np.abs(b_s) / ds)
        return float(rho.max())


@functools.lru_cache(maxsize=16)
def _operator(m: HopfModuli, grid: GridSpec) -> ReducedFlow:
    return ReducedFlow(m, grid)


def _check_state(state: FlowState):
    if not 0.0 <= state.t < 0.5:
        raise ValueError(f"flow time must lie in [0, 1/2), got {state.t}")
    if state.phi.shape != state.grid.shape:
        raise ValueError(f"phi has shape {state.phi.shape}, grid wants {state.grid.shape}")


def _frame_to_ambient(m: HopfModuli, grid: GridSpec, index, comps) -> np.ndarray:
    i, j = index
    p = ambient_from_reduced(m, ReducedCoord(grid.u[i], grid.sigma[j])).real
    g11, g12, g22 = (float(np.asarray(c)[i, j]) if np.ndim(c) == 2 else float(np.asarray(c)[j])
                     for c in comps)
    return np.array([[g11 / p[0] ** 2, g12 / (p[0] * p[1])],
                     [g12 / (p[0] * p[1]), g22 / p[1] ** 2]], dtype=complex)


def reduced_complex_hessian(state: FlowState, index) -> np.ndarray:
    """``d^2 phi / dz_i dzbar_j`` at grid node ``index = (i_u, j_sigma)``,
    evaluated at the real positive representative of the orbit."""
    _check_state(state)
    op = _operator(state.moduli, state.grid)
    return _frame_to_ambient(state.moduli, state.grid, index, op.frame_hessian(state.phi))


def assemble_evolving_metric(state: FlowState, index) -> np.ndarray:
    """``omega_t + i ddbar phi`` at one grid node, in ambient coordinates."""
    _check_state(state)
    op = _operator(state.moduli, state.grid)
    G = op.frame_metric(state.t, state.phi)
    i, j = index
    if not (G[0][i, j] > 0 and G[0][i, j] * G[2][i, j] - G[1][i, j] ** 2 > 0):
        raise PositivityFailure(f"metric not positive definite at grid index {index}", tuple(index))
    return _frame_to_ambient(state.moduli, state.grid, index, G)


def flow_rhs(state: FlowState) -> np.ndarray:
    """``log det g - log det chi`` over the grid."""
    _check_state(state)
    return _operator(state.moduli, state.grid).rhs(state.t, state.phi)


def _rk4(op: ReducedFlow, t: float, phi: np.ndarray, dt: float, k1=None):
    if k1 is None:
        k1 = op.rhs(t, phi)
    k2 = op.rhs(t + 0.5 * dt, phi + 0.5 * dt * k1)
    k3 = op.rhs(t + 0.5 * dt, phi + 0.5 * dt * k2)
    k4 = op.rhs(t + dt, phi + dt * k3)
    return phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(state: FlowState, dt: float) -> FlowState:
    """One classical RK4 step; raises :class:`PositivityFailure` if any stage
    leaves the cone of positive metrics."""
    _check_state(state)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if state.t + dt >= 0.5:
        raise ValueError("step would reach the extinction time t = 1/2")
    op = _operator(state.moduli, state.grid)
    phi = _rk4(op, state.t, state.phi, dt)
    return replace(state, t=state.t + dt, phi=phi)


def exact_round_potential(t):
    """Spatially constant solution on the round surface from zero data:
    ``phi(t) = -(1 - 2t)(log(1 - 2t) - 1)/2 - 1/2``."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t >= 0.5)):
        raise ValueError("the round solution exists for 0 <= t < 1/2")
    s = 1.0 - 2.0 * t
    out = -s * (np.log(s) - 1.0) / 2.0 - 0.5
    return out[()] if out.ndim == 0 else out


# -- initial data and snapshots -----------------------------------------------

def write_snapshot(path, state: FlowState) -> Path:
    """JSON header line, then one line of comma-separated ``repr`` floats per
    ``u``-row (row-major, ``n_u`` rows of ``n_sigma`` values)."""
    path = Path(path)
    header = {
        "format": "hopfflow-snapshot/1",
        "abs_alpha": state.moduli.abs_alpha,
        "abs_beta": state.moduli.abs_beta,
        "n_u": state.grid.n_u,
        "n_sigma": state.grid.n_sigma,
        "t": state.t,
        "order": "row-major (u, sigma)",
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines += [",".join(repr(float(v)) for v in row) for row in state.phi]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(text[0])
    rows = [[float(v) for v in line.split(",")] for line in text[1:] if line.strip()]
    phi = np.array(rows, dtype=float)
    if phi.shape != (header["n_u"], header["n_sigma"]):
        raise ValueError(f"snapshot body has shape {phi.shape}, header says "
                         f"({header['n_u']}, {header['n_sigma']})")
    return header, phi


def _admissible(m: HopfModuli, grid: GridSpec, psi: np.ndarray):
    op = _operator(m, grid)
    try:
        op._check(op.frame_metric(0.0, psi), "ghat + i ddbar psi")
    except PositivityFailure as exc:
        i, j = exc.index
        raise InadmissibleInitialData(
            f"initial potential inadmissible at grid index {exc.index} "
            f"(u={grid.u[i]:.6g}, sigma={grid.sigma[j]:.6g})", exc.index) from None


def make_initial_potential(m: HopfModuli, grid: GridSpec, initial: InitialData) -> np.ndarray:
    """Grid values of the initial potential, checked for ``ghat + i ddbar psi > 0``."""
    if initial.family == "zero":
        psi = np.zeros(grid.shape)
    elif initial.family == "cos-bump":
        U, S = np.meshgrid(grid.u, grid.sigma, indexing="ij")
        psi = initial.epsilon * np.cos(2.0 * np.pi * U / grid.period_L) * S * (1.0 - S)
    else:
        header, psi = read_snapshot(initial.path)
        if (header["n_u"], header["n_sigma"]) != grid.shape:
            raise ValueError("snapshot grid does not match the run grid")
        if not (math.isclose(header["abs_alpha"], m.abs_alpha) and math.isclose(header["abs_beta"], m.abs_beta)):
            raise ValueError("snapshot moduli do not match the run moduli")
        if not np.all(np.isfinite(psi)):
            raise ValueError("snapshot contains non-finite values")
    _admissible(m, grid, psi)
    return psi


# -- driver -----------------------------------------------------------------

def _targets(control: FlowControl):
    n = int(math.floor(control.t_max / control.monitor_cadence + 1e-9))
    ts = {round(k * control.monitor_cadence, 12) for k in range(1, n + 1)}
    ts |= {float(t) for t in control.snapshot_times if 0 < t <= control.t_max}
    ts.add(float(control.t_max))
    return sorted(t for t in ts if t <= control.t_max)


def run_flow(m: HopfModuli, grid: GridSpec, initial: InitialData,
             control: FlowControl | None = None, on_snapshot=None) -> FlowResult:
    """Integrate from ``t = 0`` to ``control.t_max`` with adaptive RK4.

    ``dt = cfl / rho`` with ``rho`` a Gershgorin bound of the linearised
    operator; a step whose stages or end state lose positivity is retried with
    half the step.  Monitor records are taken at ``t = 0`` and every
    ``monitor_cadence``; ``on_snapshot(state)`` is called at each requested
    snapshot time.

    Raises
    ------
    InadmissibleInitialData
        If ``ghat + i ddbar psi`` fails to be positive on the grid.
    FlowAborted
        If a step still fails after ``control.max_retries`` halvings.
    """
    from .diagnostics import monitor_record

    control = control or FlowControl()
    op = _operator(m, grid)
    phi = make_initial_potential(m, grid, initial)
    t = 0.0
    k1, G = op.rhs(t, phi, with_metric=True)
    state = FlowState(m, grid, t, phi)
    records = [monitor_record(state, control.A, control.B, phi_dot=k1)]
    snaps = set(float(s) for s in control.snapshot_times)
    result = FlowResult(records, state, "running")
    steps = rejected = 0
    for target in _targets(control):
        while t < target:
            dt = min(control.cfl / op.spectral_radius(G), target - t)
            if target - (t + dt) < 1e-3 * dt:
                dt = target - t
            for _ in range(control.max_retries + 1):
                t_new = target if t + dt >= target else t + dt
                try:
                    phi_new = _rk4(op, t, phi, t_new - t, k1)
                    k1_new, G_new = op.rhs(t_new, phi_new, with_metric=True)
                except PositivityFailure:
                    rejected += 1
                    dt *= 0.5
                    continue
                break
            else:
                result.state = FlowState(m, grid, t, phi)
                result.termination = "positivity_failure"
                result.steps, result.rejected = steps, rejected
                raise FlowAborted(f"positivity lost near t = {t:.6g} after "
                                  f"{control.max_retries} step halvings", result)
            t, phi, k1, G = t_new, phi_new, k1_new, G_new
            steps += 1
        state = FlowState(m, grid, t, phi)
        records.append(monitor_record(state, control.A, control.B, phi_dot=k1,
                                      volume0=records[0].volume))
        if target in snaps and on_snapshot is not None:
            result.snapshots.append(on_snapshot(state))
    result.state = state
    result.termination = "t_max"
    result.steps, result.rejected = steps, rejected
    return result
