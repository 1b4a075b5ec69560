import math

import numpy as np
import pytest
import scipy.linalg

from fastmsckf.propagation import (ImuSample, ImuStreamGap, NoiseConfig,
                                   bias_corrected, compute_F, compute_G,
                                   integrate_nominal, propagate)
from fastmsckf.quat import (error_quat, quat_conjugate, quat_identity,
                            quat_multiply, quat_to_rot, rotation_angle)
from fastmsckf.state import FilterState, ImuState, DEFAULT_GRAVITY

from conftest import random_filter_state, random_quat

GRAVITY = DEFAULT_GRAVITY


def zero_noise():
    return NoiseConfig(sigma_g=0, sigma_wg=0, sigma_a=0, sigma_wa=0,
                       sigma_im=1e-3)


def test_bias_corrected_zero_bias():
    imu = ImuState()
    s = ImuSample(0, np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]))
    w, a = bias_corrected(s, imu)
    assert np.array_equal(w, s.w)
    assert np.array_equal(a, s.a)


def test_bias_corrected_cancels():
    imu = ImuState(bg=np.array([0.1, 0.2, 0.3]), ba=np.array([0.0, 0.0, 0.1]))
    s = ImuSample(0, np.array([0.1, 0.2, 0.3]), np.array([0.0, 0.0, 9.91]))
    w, a = bias_corrected(s, imu)
    assert np.allclose(w, np.zeros(3), atol=1e-15)
    assert np.allclose(a, [0, 0, 9.81], atol=1e-12)


def test_integrate_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        integrate_nominal(ImuState(), np.zeros(3), np.zeros(3), 0.0, GRAVITY)


def test_integrate_hover_equilibrium(rng):
    imu = ImuState(q=random_quat(rng))
    a_hat = -quat_to_rot(imu.q) @ GRAVITY  # cancels gravity exactly
    state = imu.copy()
    for _ in range(200):
        state = integrate_nominal(state, np.zeros(3), a_hat, 0.005, GRAVITY)
    assert np.allclose(state.p, imu.p, atol=1e-12)
    assert np.allclose(state.v, imu.v, atol=1e-12)
    assert np.allclose(state.q, imu.q, atol=1e-12)


def test_integrate_constant_yaw_rate():
    # quarter turn about body z in one second at the nominal IMU rate
    w_hat = np.array([0.0, 0.0, math.pi / 2])
    state = ImuState()
    a_hat = -quat_to_rot(state.q) @ GRAVITY
    for _ in range(200):
        a_hat = -quat_to_rot(state.q) @ GRAVITY
        state = integrate_nominal(state, w_hat, a_hat, 0.005, GRAVITY)
    expected = np.array([0.0, 0.0, math.sin(math.pi / 4), math.cos(math.pi / 4)])
    err = quat_multiply(state.q, quat_conjugate(expected))
    assert rotation_angle(err) < 1e-9


def test_integrate_free_fall():
    state = ImuState()
    state = integrate_nominal(state, np.zeros(3), np.zeros(3), 1.0, GRAVITY)
    assert np.allclose(state.v, GRAVITY, atol=1e-12)
    assert np.allclose(state.p, 0.5 * GRAVITY, atol=1e-12)
    assert np.allclose(state.q, quat_identity())


def test_F_layout_zero_inputs():
    F = compute_F(ImuState(), np.zeros(3), np.zeros(3))
    expected = np.zeros((15, 15))
    expected[0:3, 3:6] = -np.eye(3)
    expected[6:9, 9:12] = -np.eye(3)
    expected[12:15, 6:9] = np.eye(3)
    assert np.array_equal(F, expected)


def test_F_top_left_block(rng):
    from fastmsckf.quat import skew
    w_hat = rng.standard_normal(3)
    F = compute_F(ImuState(q=random_quat(rng)), w_hat, rng.standard_normal(3))
    assert np.array_equal(F[0:3, 0:3], -skew(w_hat))


def test_G_layout(rng):
    imu = ImuState(q=random_quat(rng))
    G = compute_G(imu)
    assert G.shape == (15, 12)
    assert np.array_equal(G[0:3, 0:3], -np.eye(3))
    assert np.array_equal(G[3:6, 3:6], np.eye(3))
    assert np.allclose(G[6:9, 6:9], -quat_to_rot(imu.q).T)
    assert np.array_equal(G[9:12, 9:12], np.eye(3))
    G_id = compute_G(ImuState())
    assert np.allclose(G_id[6:9, 6:9], -np.eye(3), atol=1e-15)


def _manifold_diff(state, ref) -> np.ndarray:
    """Error vector state (-) ref under the filter's conventions."""
    dq = quat_multiply(state.q, quat_conjugate(ref.q))
    dtheta = 2.0 * dq[:3] * np.sign(dq[3] if dq[3] != 0 else 1.0)
    return np.concatenate([dtheta, state.bg - ref.bg, state.v - ref.v,
                           state.ba - ref.ba, state.p - ref.p])


def _perturbed(imu, dx) -> ImuState:
    out = imu.copy()
    out.q = quat_multiply(error_quat(dx[0:3]), out.q)
    out.bg = out.bg + dx[3:6]
    out.v = out.v + dx[6:9]
    out.ba = out.ba + dx[9:12]
    out.p = out.p + dx[12:15]
    return out


def numerical_transition(imu, w_m, a_m, dt, h=1e-5) -> np.ndarray:
    """Central-difference transition matrix of the nonlinear propagation."""
    Phi = np.empty((15, 15))
    ref = integrate_nominal(imu, w_m - imu.bg, a_m - imu.ba, dt, GRAVITY)
    for j in range(15):
        dx = np.zeros(15)
        dx[j] = h
        plus = _perturbed(imu, dx)
        minus = _perturbed(imu, -dx)
        plus_prop = integrate_nominal(plus, w_m - plus.bg, a_m - plus.ba, dt,
                                      GRAVITY)
        minus_prop = integrate_nominal(minus, w_m - minus.bg, a_m - minus.ba,
                                       dt, GRAVITY)
        Phi[:, j] = (_manifold_diff(plus_prop, ref)
                     - _manifold_diff(minus_prop, ref)) / (2 * h)
    return Phi


@pytest.mark.parametrize("trial", range(5))
def test_F_matches_finite_difference(rng, trial):
    imu = ImuState(q=random_quat(rng), bg=0.01 * rng.standard_normal(3),
                   v=rng.standard_normal(3), ba=0.05 * rng.standard_normal(3),
                   p=rng.standard_normal(3))
    w_m = rng.standard_normal(3)
    a_m = rng.standard_normal(3) * 3
    dt = 3e-5
    Phi_num = numerical_transition(imu, w_m, a_m, dt)
    F = compute_F(imu, w_m - imu.bg, a_m - imu.ba)
    Phi_analytic = scipy.linalg.expm(F * dt)
    assert np.max(np.abs(Phi_num - Phi_analytic)) < 1e-6


def test_propagate_rejects_bad_dt(rng):
    state = random_filter_state(rng)
    sample = ImuSample(0, np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        propagate(state, sample, -0.01, zero_noise())
    with pytest.raises(ImuStreamGap):
        propagate(state, sample, 0.2, zero_noise())


def test_propagate_matches_matrix_exponential(rng):
    # constant F: no rotation, so the closed-form propagation is exp(F dt)
    state = random_filter_state(rng)
    state.imu.bg = np.zeros(3)
    state.imu.ba = np.zeros(3)
    P0 = state.P.copy()
    a_m = np.array([0.5, -0.2, 0.8])
    sample = ImuSample(0, np.zeros(3), a_m)
    dt = 0.002
    F = compute_F(state.imu, np.zeros(3), a_m)
    propagate(state, sample, dt, zero_noise())
    expF = scipy.linalg.expm(F * dt)
    assert np.max(np.abs(state.P - expF @ P0 @ expF.T)) < 1e-10


def test_propagate_zero_noise_trace_growth_only_from_coupling(rng):
    state = random_filter_state(rng)
    state.imu.bg = np.zeros(3)
    state.imu.ba = np.zeros(3)
    P0 = state.P.copy()
    sample = ImuSample(0, np.zeros(3), np.array([0.1, 0.0, 0.0]))
    F = compute_F(state.imu, np.zeros(3), sample.a)
    propagate(state, sample, 0.002, zero_noise())
    expF = scipy.linalg.expm(F * 0.002)
    assert np.allclose(state.P, expF @ P0 @ expF.T, atol=1e-10)


def test_propagate_clone_block_untouched(rng):
    state = random_filter_state(rng, n_clones=3)
    clone_block = state.P[15:, 15:].copy()
    sample = ImuSample(0, rng.standard_normal(3),
                       rng.standard_normal(3) * 2)
    propagate(state, sample, 0.005, NoiseConfig())
    assert np.array_equal(state.P[15:, 15:], clone_block)


def test_propagate_cross_covariance_mapped(rng):
    state = random_filter_state(rng, n_clones=2)
    sample = ImuSample(0, np.zeros(3), np.zeros(3))
    state.imu.bg = np.zeros(3)
    state.imu.ba = np.zeros(3)
    P_IC0 = state.P[:15, 15:].copy()
    F = compute_F(state.imu, np.zeros(3), -state.imu.ba)
    propagate(state, sample, 0.002, zero_noise())
    expF = scipy.linalg.expm(F * 0.002)
    assert np.allclose(state.P[:15, 15:], expF @ P_IC0, atol=1e-10)


def test_propagate_vanishing_interval_is_identity_map(rng):
    # as dt -> 0 the transition matrix approaches identity, so the cross
    # covariance and the nominal state stay put
    state = random_filter_state(rng, n_clones=2)
    P_IC0 = state.P[:15, 15:].copy()
    p0 = state.imu.p.copy()
    sample = ImuSample(0, rng.standard_normal(3), rng.standard_normal(3))
    propagate(state, sample, 1e-12, zero_noise())
    assert np.max(np.abs(state.P[:15, 15:] - P_IC0)) < 1e-10
    assert np.allclose(state.imu.p, p0, atol=1e-10)


def test_propagate_preserves_symmetry(rng):
    state = random_filter_state(rng, n_clones=4)
    for i in range(50):
        sample = ImuSample(i, 0.5 * rng.standard_normal(3),
                           rng.standard_normal(3) * 3)
        propagate(state, sample, 0.005, NoiseConfig())
        assert np.max(np.abs(state.P - state.P.T)) == 0.0


def test_process_noise_matrix_layout():
    n = NoiseConfig(sigma_g=0.1, sigma_wg=0.2, sigma_a=0.3, sigma_wa=0.4,
                    sigma_im=1e-3)
    Q = n.q_matrix()
    assert Q.shape == (12, 12)
    assert np.allclose(np.diag(Q),
                       [0.01] * 3 + [0.04] * 3 + [0.09] * 3 + [0.16] * 3)


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(sigma_g=-1.0)
    with pytest.raises(ValueError):
        NoiseConfig(sigma_im=0.0)
    NoiseConfig(sigma_g=0.0)  # zero process noise is allowed


def test_nominal_tracking_against_true_trajectory():
    # perfect IMU at 200 Hz over 10 s must stay within integration error
    from fastmsckf.sim import ScenarioConfig, generate_trajectory, synthesize_imu

    cfg = ScenarioConfig(trajectory="circle", duration_s=10.0, seed=3,
                         landmark_count=10)
    gt = generate_trajectory(cfg)
    samples, _ = synthesize_imu(gt, zero_noise(), seed=3)
    imu = ImuState(q=gt.q[0].copy(), v=gt.v[0].copy(), p=gt.p[0].copy())
    t_prev = samples[0].timestamp_ns
    for s in samples[1:]:
        dt = (s.timestamp_ns - t_prev) * 1e-9
        t_prev = s.timestamp_ns
        imu = integrate_nominal(imu, s.w, s.a, dt, GRAVITY)
    assert np.linalg.norm(imu.p - gt.p[-1]) < 1e-4
