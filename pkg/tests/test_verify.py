import numpy as np
import pytest

from hopfflow.geometry import make_moduli, solve_phi
from hopfflow.tensors import phi_gradient, ricci_chi
from hopfflow.verify import (PRESETS, VerificationReport, axis_points, fd_complex_derivative,
                             fd_complex_hessian, gauduchon_scalar, nongauduchon_control,
                             point_scale, run_suite, sample_points, verify_det_identity,
                             verify_gauduchon, verify_lck, verify_trace_identity)


def test_fd_derivative_of_simple_functions():
    p = np.array([[1.0 + 0.5j, -0.3 + 2j]])
    f = lambda q: np.abs(q[..., 0]) ** 2  # noqa: E731
    d = fd_complex_derivative(f, p, 1e-4)
    np.testing.assert_allclose(d[0], [np.conj(p[0, 0]), 0], atol=1e-8)
    dbar = fd_complex_derivative(f, p, 1e-4, conjugate=True)
    np.testing.assert_allclose(dbar[0], [p[0, 0], 0], atol=1e-8)
    # holomorphic z1^2 z2: d/dz1 = 2 z1 z2, dbar = 0
    g = lambda q: q[..., 0] ** 2 * q[..., 1]  # noqa: E731
    np.testing.assert_allclose(fd_complex_derivative(g, p, 1e-4)[0],
                               [2 * p[0, 0] * p[0, 1], p[0, 0] ** 2], atol=1e-7)
    np.testing.assert_allclose(fd_complex_derivative(g, p, 1e-4, conjugate=True)[0], 0, atol=1e-7)


def test_fd_hessian_of_r_squared_is_identity():
    rng = np.random.default_rng(0)
    p = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
    H = fd_complex_hessian(lambda q: np.sum(np.abs(q) ** 2, axis=-1), p, 1e-3)
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(2), H.shape), atol=1e-9)


def test_fd_gradient_of_phi_second_order():
    m = make_moduli(2, 4)
    p = np.array([[1.0, 1.0]], dtype=complex)
    exact = phi_gradient(m, p)
    errs = [np.abs(fd_complex_derivative(lambda q: solve_phi(m, q), p, h) - exact).max()
            for h in (2e-3, 1e-3)]
    assert errs[1] < 1e-6
    assert np.log2(errs[0] / errs[1]) > 1.8
    assert np.abs(fd_complex_derivative(lambda q: solve_phi(m, q), p, 1e-4) - exact).max() < 1e-7


def test_ddbar_log_phi_is_half_ricci_chi():
    m = make_moduli(2, 4)
    p = sample_points(m, 20, seed=5)
    H = fd_complex_hessian(lambda q: np.log(solve_phi(m, q)), p, 1e-3 * point_scale(m, p))
    np.testing.assert_allclose(H, 0.5 * ricci_chi(m, p), atol=1e-6)


def test_sample_points_deterministic_and_off_axis():
    m = make_moduli(1.5, 3)
    a = sample_points(m, 50, seed=7)
    b = sample_points(m, 50, seed=7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_points(m, 50, seed=8))
    assert np.all(np.abs(a) > 0)
    ax = axis_points(m)
    assert np.all(np.min(np.abs(ax), axis=-1) == 0)


def test_control_form_scalar_is_order_one():
    p = np.array([[0.5 + 0.1j, 0.3]])
    S, mag = gauduchon_scalar(nongauduchon_control, p, 1e-3)
    r2 = abs(p[0, 0]) ** 2
    assert S[0].real == pytest.approx((1 + r2) * np.exp(r2), rel=1e-5)
    assert abs(S[0]) / mag[0] == pytest.approx(1.0, abs=1e-6)


def test_report_pass_logic():
    assert VerificationReport("x", 1, 1e-10, 1e-9).passed
    assert not VerificationReport("x", 1, 1e-8, 1e-9).passed
    assert not VerificationReport("x", 1, float("nan"), 1e-9).passed


@pytest.mark.parametrize("name", ["round", "asym", "mid"])
def test_core_identities(name):
    m = make_moduli(*PRESETS[name])
    assert verify_det_identity(m, 300, seed=1).passed
    assert verify_trace_identity(m, 300, seed=1).passed


def test_extreme_moduli_det_identity():
    r = verify_det_identity(make_moduli(1.1, 20), 1000, seed=2)
    assert r.max_residual < 1e-8


def test_round_identities_near_exact():
    m = make_moduli(2, 2)
    assert verify_det_identity(m, 500).max_residual < 1e-12
    assert verify_trace_identity(m, 500).max_residual < 1e-12


def test_gauduchon_and_lck_signs_agree_across_presets():
    eps = set()
    for name in PRESETS:
        m = make_moduli(*PRESETS[name])
        g = verify_gauduchon(m, samples=20, seed=3)
        assert g.passed and g.extra["control_min"] > 0.1
        lck = verify_lck(m, samples=20, seed=3)
        assert lck.passed
        eps.add(lck.extra["eps"])
    assert eps == {-1}


def test_printed_variant_breaks_the_suite():
    reports = {r.name: r for r in run_suite(make_moduli(2, 2), samples=50, fd_samples=10,
                                            variant="printed")}
    assert not reports["det_ghat_identity"].passed
    assert not reports["phi_hessian_fd"].passed


def test_suite_small_all_pass():
    reports = run_suite(make_moduli(1.5, 3), samples=100, fd_samples=20, seed=9)
    failed = [r.name for r in reports if not r.passed]
    assert failed == []
    names = [r.name for r in reports]
    assert len(names) == len(set(names))
