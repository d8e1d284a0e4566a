import math

import numpy as np
import pytest

from hopfflow.flow import (FlowAborted, FlowControl, FlowState, GridSpec, InadmissibleInitialData,
                           InitialData, PositivityFailure, ReducedFlow, assemble_evolving_metric,
                           chart_jacobians, exact_round_potential, flow_rhs,
                           make_initial_potential, read_snapshot, reduced_complex_hessian,
                           run_flow, step_rk4, write_snapshot)
from hopfflow.geometry import (ReducedCoord, ambient_from_reduced, make_moduli,
                               reduced_from_ambient)
from hopfflow.tensors import hat_metric, reference_metric
from hopfflow.verify import fd_complex_hessian, point_scale


def _chart(m, x):
    rc = reduced_from_ambient(m, np.exp(x).astype(complex))
    return np.array([rc.u, rc.sigma])


@pytest.mark.parametrize("s0", [0.05, 0.3, 0.8])
def test_chart_jacobians_match_finite_differences(s0):
    m = make_moduli(2, 4)
    x = np.log(ambient_from_reduced(m, ReducedCoord(0.2, s0)).real)
    J = chart_jacobians(m, s0)
    e = np.eye(2)
    h = 1e-5
    d1 = np.array([(_chart(m, x + h * a) - _chart(m, x - h * a)) / (2 * h) for a in e])
    np.testing.assert_allclose(d1[:, 0], J.du_dx, atol=1e-9)
    np.testing.assert_allclose(d1[:, 1], J.dsigma_dx, atol=1e-9)
    h = 1e-4
    d2 = np.array([[(_chart(m, x + h * (a + b)) - _chart(m, x + h * (a - b))
                     - _chart(m, x - h * (a - b)) + _chart(m, x - h * (a + b))) / (4 * h * h)
                    for b in e] for a in e])
    np.testing.assert_allclose(d2[..., 0], J.d2u_dx2, atol=1e-7)
    np.testing.assert_allclose(d2[..., 1], J.d2sigma_dx2, atol=1e-7)


def test_chart_jacobians_reject_endpoints():
    with pytest.raises(ValueError):
        chart_jacobians(make_moduli(2, 4), np.array([0.0, 0.5]))


def test_frame_hessian_of_u_is_ghat_minus_theta():
    # u = log Phi and i ddbar log Phi = ghat - Theta; the stencil is exact on
    # linear functions away from the periodic seam
    m = make_moduli(1.5, 3)
    grid = GridSpec.for_moduli(m, 16, 16)
    op = ReducedFlow(m, grid)
    U, _ = np.meshgrid(grid.u, grid.sigma, indexing="ij")
    for h, want in zip(op.frame_hessian(U), op.ddbar_u):
        np.testing.assert_allclose(h[1:-1], np.broadcast_to(want, h[1:-1].shape),
                                   rtol=1e-12, atol=1e-14)


def test_reduced_hessian_converges_to_ambient_oracle():
    m = make_moduli(2, 4)
    L = m.period_L

    def f_us(u, s):
        return 0.05 * np.sin(2 * np.pi * u / L) * s ** 2 * (1 - s) ** 2

    def f(q):
        rc = reduced_from_ambient(m, q)
        return f_us(rc.u, rc.sigma)

    errs = []
    for n in (32, 64):
        grid = GridSpec.for_moduli(m, n, n)
        U, S = np.meshgrid(grid.u, grid.sigma, indexing="ij")
        state = FlowState(m, grid, 0.0, f_us(U, S))
        idx = (n // 8, n // 4)
        H = reduced_complex_hessian(state, idx)
        p = ambient_from_reduced(m, ReducedCoord(grid.u[idx[0]], grid.sigma[idx[1]]))[None]
        fd = fd_complex_hessian(f, p, 1e-4 * point_scale(m, p))[0]
        errs.append(np.abs(H - fd).max() / np.abs(fd).max())
    assert errs[1] < 5e-3
    assert math.log2(errs[0] / errs[1]) > 1.8


def test_evolving_metric_at_zero_potential_is_reference():
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 16, 16)
    state = FlowState(m, grid, 0.3, np.zeros(grid.shape))
    idx = (3, 5)
    p = ambient_from_reduced(m, ReducedCoord(grid.u[3], grid.sigma[5]))
    p = np.abs(p)
    np.testing.assert_allclose(assemble_evolving_metric(state, idx), reference_metric(m, 0.3, p),
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(assemble_evolving_metric(FlowState(m, grid, 0.0, state.phi), idx),
                               hat_metric(m, p), rtol=1e-12, atol=1e-14)


def _smooth(grid, eps=0.02):
    U, S = np.meshgrid(grid.u, grid.sigma, indexing="ij")
    return eps * (np.cos(2 * np.pi * U / grid.period_L) + 0.5 * np.sin(4 * np.pi * U / grid.period_L)) * S * (1 - S)


@pytest.mark.parametrize("ab", [(2, 4), (1.5, 3), (2, 2)])
def test_kernels_match_numpy_reference(ab):
    m = make_moduli(*ab)
    grid = GridSpec.for_moduli(m, 24, 20)
    op = ReducedFlow(m, grid)
    phi = _smooth(grid)
    for t in (0.0, 0.2, 0.45):
        G = op.frame_metric(t, phi)
        for a, b in zip(G, op.frame_metric_reference(t, phi)):
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(op.rhs(t, phi), op.rhs_reference(t, phi), rtol=1e-12, atol=1e-13)
        assert op.spectral_radius(G) == pytest.approx(op.spectral_radius_reference(G), rel=1e-13)


def test_rhs_raises_on_lost_positivity():
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 16, 16)
    with pytest.raises(PositivityFailure) as info:
        flow_rhs(FlowState(m, grid, 0.0, 1e3 * _smooth(grid, 1.0)))
    assert info.value.index is not None


def test_round_zero_data_stays_constant_and_exact():
    m = make_moduli(2, 2)
    grid = GridSpec.for_moduli(m, 16, 16)
    state = FlowState(m, grid, 0.0, np.zeros(grid.shape))
    assert np.abs(flow_rhs(state)).max() < 1e-13
    # explicit scheme: keep dt under the stability limit of the 16 x 16 grid
    for _ in range(100):
        state = step_rk4(state, 0.002)
    assert np.ptp(state.phi) < 1e-13
    assert abs(state.phi[0, 0] - exact_round_potential(0.2)) < 1e-9


def test_rk4_is_fourth_order_on_round_solution():
    m = make_moduli(2, 2)
    grid = GridSpec.for_moduli(m, 8, 8)
    errs = []
    for n in (4, 8, 16):
        state = FlowState(m, grid, 0.0, np.zeros(grid.shape))
        for _ in range(n):
            state = step_rk4(state, 0.4 / n)
        errs.append(abs(state.phi[0, 0] - exact_round_potential(0.4)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) > 3.7


def test_step_argument_checks():
    m = make_moduli(2, 2)
    grid = GridSpec.for_moduli(m, 8, 8)
    state = FlowState(m, grid, 0.4, np.zeros(grid.shape))
    with pytest.raises(ValueError):
        step_rk4(state, 0.1)
    with pytest.raises(ValueError):
        step_rk4(state, -0.01)
    with pytest.raises(ValueError):
        flow_rhs(FlowState(m, grid, 0.0, np.zeros((8, 9))))


def test_exact_round_potential_values():
    assert exact_round_potential(0.0) == 0.0
    assert exact_round_potential(0.25) == pytest.approx(-0.0767132, abs=1e-7)
    np.testing.assert_allclose(exact_round_potential([0.0, 0.25]), [0.0, -0.0767132], atol=1e-7)
    with pytest.raises(ValueError):
        exact_round_potential(0.5)


def test_grid_layout():
    m = make_moduli(2, 4)
    g = GridSpec.for_moduli(m, 8, 10)
    assert g.shape == (8, 10) and g.du == pytest.approx(m.period_L / 8)
    assert g.sigma[0] == pytest.approx(0.05) and g.sigma[-1] == pytest.approx(0.95)
    with pytest.raises(ValueError):
        GridSpec.for_moduli(m, 4, 10)


def test_initial_data_admissibility():
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 16, 16)
    psi = make_initial_potential(m, grid, InitialData("cos-bump", 0.01))
    assert psi.shape == grid.shape and np.abs(psi).max() <= 0.01 / 4
    with pytest.raises(InadmissibleInitialData) as info:
        make_initial_potential(m, grid, InitialData("cos-bump", 1e3))
    assert "grid index" in str(info.value)
    with pytest.raises(InadmissibleInitialData):
        run_flow(m, grid, InitialData("cos-bump", 1e3), FlowControl(t_max=0.1))
    with pytest.raises(ValueError):
        InitialData("gaussian")
    with pytest.raises(ValueError):
        InitialData("file")


def test_snapshot_round_trip_and_file_initial_data(tmp_path):
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 12, 10)
    phi = _smooth(grid) + 1e-17 * np.arange(120).reshape(12, 10)
    path = write_snapshot(tmp_path / "s.txt", FlowState(m, grid, 0.125, phi))
    header, back = read_snapshot(path)
    assert header["t"] == 0.125 and header["n_u"] == 12
    np.testing.assert_array_equal(back, phi)
    psi = make_initial_potential(m, grid, InitialData("file", path=str(path)))
    np.testing.assert_array_equal(psi, phi)
    with pytest.raises(ValueError):
        make_initial_potential(make_moduli(2, 5), GridSpec.for_moduli(make_moduli(2, 5), 12, 10),
                               InitialData("file", path=str(path)))
    with pytest.raises(ValueError):
        make_initial_potential(m, GridSpec.for_moduli(m, 16, 10), InitialData("file", path=str(path)))


def test_run_flow_records_and_snapshots():
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 16, 16)
    seen = []
    res = run_flow(m, grid, InitialData("cos-bump", 0.01),
                   FlowControl(t_max=0.1, cfl=1.0, monitor_cadence=0.025, snapshot_times=(0.05,)),
                   on_snapshot=lambda s: seen.append(s.t) or s.t)
    assert [r.t for r in res.records] == pytest.approx([0, 0.025, 0.05, 0.075, 0.1])
    assert res.termination == "t_max" and res.state.t == pytest.approx(0.1)
    assert seen == [pytest.approx(0.05)] and res.snapshots == seen
    assert res.steps > 0 and res.rejected == 0


def test_step_rejection_and_abort(monkeypatch):
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 16, 16)
    # a tiny spectral radius forces oversized steps that must be halved
    monkeypatch.setattr(ReducedFlow, "spectral_radius", lambda self, G: 1e-6)
    control = FlowControl(t_max=0.45, monitor_cadence=0.45)
    res = run_flow(m, grid, InitialData("cos-bump", 0.01), control)
    assert res.rejected > 0 and res.termination == "t_max"
    with pytest.raises(FlowAborted) as info:
        run_flow(m, grid, InitialData("cos-bump", 0.01),
                 FlowControl(t_max=0.45, monitor_cadence=0.45, max_retries=0))
    part = info.value.partial
    assert part.termination == "positivity_failure" and part.state.t == 0.0
    assert len(part.records) == 1


def test_result_is_independent_of_cfl():
    m = make_moduli(2, 4)
    grid = GridSpec.for_moduli(m, 16, 16)
    runs = [run_flow(m, grid, InitialData("cos-bump", 0.01), FlowControl(t_max=0.2, cfl=c))
            for c in (0.5, 1.0)]
    assert np.abs(runs[0].state.phi - runs[1].state.phi).max() < 1e-9


def test_flow_control_validation():
    for kw in ({"t_max": 0.5}, {"t_max": 0.0}, {"cfl": 0.0}, {"monitor_cadence": -1.0}):
        with pytest.raises(ValueError):
            FlowControl(**kw)
