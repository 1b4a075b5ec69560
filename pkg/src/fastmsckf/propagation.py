"""IMU state and covariance propagation.

Each accepted IMU sample advances the nominal IMU block, the 15x15 IMU
covariance, and the IMU/clone cross-covariance. The nominal state, the
state-transition matrix and the IMU covariance are integrated jointly by a
single fourth-order Runge-Kutta step over the sample interval, holding the
bias-corrected rates constant (zero-order hold). The process-noise term is
integrated inside the same Lyapunov right-hand side rather than bolted on
afterwards, so there is exactly one integrator and one source of truth.

Clone/clone covariance blocks are untouched by propagation; the cross blocks
are mapped by the transition matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .quat import omega_matrix, quat_normalize, quat_to_rot, skew
from .state import ATT, BA, BG, FilterState, IMU_DIM, ImuState, POS, VEL, symmetrize

logger = logging.getLogger(__name__)

# samples further apart than this are treated as a stream gap, not integrated
MAX_IMU_DT = 0.1


class ImuStreamGap(ValueError):
    """Raised when consecutive IMU samples are too far apart to integrate."""


class FilterDiverged(RuntimeError):
    """Raised when the covariance stops being finite."""


@dataclass
class ImuSample:
    timestamp_ns: int
    w: np.ndarray  # measured angular rate, rad/s
    a: np.ndarray  # measured specific force, m/s^2


@dataclass
class NoiseConfig:
    """Continuous-time IMU noise densities plus the image measurement std.

    sigma_g / sigma_a are white-noise densities (rad/s/sqrt(Hz),
    m/s^2/sqrt(Hz)); sigma_wg / sigma_wa drive the bias random walks;
    sigma_im is the normalized-pixel measurement std (dimensionless).
    Zero process densities are allowed so noise-free oracle runs can share
    the same configuration type; sigma_im must stay positive because it
    scales the measurement covariance.
    """

    sigma_g: float = 1.7e-4
    sigma_wg: float = 1.9e-5
    sigma_a: float = 2.0e-3
    sigma_wa: float = 3.0e-3
    sigma_im: float = 2.0e-3

    def __post_init__(self):
        vals = [self.sigma_g, self.sigma_wg, self.sigma_a, self.sigma_wa,
                self.sigma_im]
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise ValueError("noise densities must be finite and >= 0")
        if self.sigma_im <= 0:
            raise ValueError("sigma_im must be > 0")

    def q_matrix(self) -> np.ndarray:
        """Block-diagonal continuous process noise, ordered (g, wg, a, wa)."""
        d = np.repeat([self.sigma_g ** 2, self.sigma_wg ** 2,
                       self.sigma_a ** 2, self.sigma_wa ** 2], 3)
        return np.diag(d)

    def error_state_noise(self) -> np.ndarray:
        """The propagated noise term G Q G^T.

        The attitude and velocity noise inputs enter through rotation
        matrices, which cancel in G Q G^T, so the term is constant and
        diagonal regardless of the state.
        """
        d = np.zeros(IMU_DIM)
        d[ATT] = self.sigma_g ** 2
        d[BG] = self.sigma_wg ** 2
        d[VEL] = self.sigma_a ** 2
        d[BA] = self.sigma_wa ** 2
        return np.diag(d)


def bias_corrected(sample: ImuSample, imu: ImuState):
    """Subtract the current bias estimates from a raw sample."""
    return sample.w - imu.bg, sample.a - imu.ba


def compute_F(imu: ImuState, w_hat, a_hat) -> np.ndarray:
    """Continuous error-state dynamics matrix at the current estimate."""
    F = np.zeros((IMU_DIM, IMU_DIM))
    R_GI = quat_to_rot(imu.q).T  # body -> global
    F[ATT, ATT] = -skew(w_hat)
    F[ATT, BG] = -np.eye(3)
    F[VEL, ATT] = -R_GI @ skew(a_hat)
    F[VEL, BA] = -R_GI
    F[POS, VEL] = np.eye(3)
    return F


def compute_G(imu: ImuState) -> np.ndarray:
    """Noise input matrix mapping (n_g, n_wg, n_a, n_wa) into the error state."""
    G = np.zeros((IMU_DIM, 12))
    R_GI = quat_to_rot(imu.q).T
    G[ATT, 0:3] = -np.eye(3)
    G[BG, 3:6] = np.eye(3)
    G[VEL, 6:9] = -R_GI
    G[BA, 9:12] = np.eye(3)
    return G


def _deriv(q, v, w_hat, a_hat, gravity, Omega):
    """Nominal kinematics: q_dot, v_dot, p_dot with zero-order-hold inputs."""
    dq = 0.5 * Omega @ q
    dv = quat_to_rot(quat_normalize(q)).T @ a_hat + gravity
    dp = v
    return dq, dv, dp


def integrate_nominal(imu: ImuState, w_hat, a_hat, dt: float,
                      gravity) -> ImuState:
    """One RK4 step of the nominal IMU kinematics; biases stay constant."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    w_hat = np.asarray(w_hat, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    Omega = omega_matrix(w_hat)

    q0, v0, p0 = imu.q, imu.v, imu.p
    k1q, k1v, k1p = _deriv(q0, v0, w_hat, a_hat, gravity, Omega)
    k2q, k2v, k2p = _deriv(q0 + 0.5 * dt * k1q, v0 + 0.5 * dt * k1v,
                           w_hat, a_hat, gravity, Omega)
    k3q, k3v, k3p = _deriv(q0 + 0.5 * dt * k2q, v0 + 0.5 * dt * k2v,
                           w_hat, a_hat, gravity, Omega)
    k4q, k4v, k4p = _deriv(q0 + dt * k3q, v0 + dt * k3v,
                           w_hat, a_hat, gravity, Omega)

    q1 = quat_normalize(q0 + (dt / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q))
    v1 = v0 + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    p1 = p0 + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    return ImuState(q1, imu.bg.copy(), v1, imu.ba.copy(), p1)


def propagate(state: FilterState, sample: ImuSample, dt: float,
              noise: NoiseConfig) -> FilterState:
    """Advance the filter over one IMU interval.

    Jointly integrates the nominal kinematics, the transition matrix
    Phi_dot = F Phi from identity, and the Lyapunov equation
    P_dot = F P + P F^T + G Q G^T, all with one RK4 step. The cross
    covariance is then mapped by Phi and the clone block kept verbatim.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > MAX_IMU_DT:
        raise ImuStreamGap(
            f"IMU gap of {dt:.4f}s at t={sample.timestamp_ns} exceeds "
            f"{MAX_IMU_DT}s; sample rejected")

    imu = state.imu
    w_hat, a_hat = bias_corrected(sample, imu)
    Omega = omega_matrix(w_hat)
    GQG = noise.error_state_noise()
    gravity = state.gravity

    q0, v0 = imu.q, imu.v
    Phi0 = np.eye(IMU_DIM)
    P0 = state.P[:IMU_DIM, :IMU_DIM]

    # only the velocity rows of F depend on the stage attitude
    skew_a = skew(a_hat)
    F = np.zeros((IMU_DIM, IMU_DIM))
    F[ATT, ATT] = -skew(w_hat)
    F[ATT, BG] = -np.eye(3)
    F[POS, VEL] = np.eye(3)

    def full_deriv(q, v, Phi, P):
        dq = 0.5 * Omega @ q
        R_GI = quat_to_rot(quat_normalize(q)).T
        F[VEL, ATT] = -R_GI @ skew_a
        F[VEL, BA] = -R_GI
        dv = R_GI @ a_hat + gravity
        dPhi = F @ Phi
        FP = F @ P  # P stays symmetric along the stages, so P F^T = (F P)^T
        dP = FP + FP.T + GQG
        return dq, dv, v, dPhi, dP

    p0 = imu.p
    k1 = full_deriv(q0, v0, Phi0, P0)
    k2 = full_deriv(q0 + 0.5 * dt * k1[0], v0 + 0.5 * dt * k1[1],
                    Phi0 + 0.5 * dt * k1[3], P0 + 0.5 * dt * k1[4])
    k3 = full_deriv(q0 + 0.5 * dt * k2[0], v0 + 0.5 * dt * k2[1],
                    Phi0 + 0.5 * dt * k2[3], P0 + 0.5 * dt * k2[4])
    k4 = full_deriv(q0 + dt * k3[0], v0 + dt * k3[1],
                    Phi0 + dt * k3[3], P0 + dt * k3[4])

    def rk4(i):
        return (dt / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])

    imu.q = quat_normalize(q0 + rk4(0))
    imu.v = v0 + rk4(1)
    imu.p = p0 + rk4(2)
    Phi = Phi0 + rk4(3)
    P_II_raw = P0 + rk4(4)
    state.note_asymmetry(P_II_raw)
    P_II = symmetrize(P_II_raw)

    n = state.error_dim()
    P = state.P
    new_P = np.empty_like(P)
    new_P[:IMU_DIM, :IMU_DIM] = P_II
    if n > IMU_DIM:
        P_IC = Phi @ P[:IMU_DIM, IMU_DIM:]
        new_P[:IMU_DIM, IMU_DIM:] = P_IC
        new_P[IMU_DIM:, :IMU_DIM] = P_IC.T
        new_P[IMU_DIM:, IMU_DIM:] = P[IMU_DIM:, IMU_DIM:]
    state.P = symmetrize(new_P)

    if not np.all(np.isfinite(state.P)):
        raise FilterDiverged(
            f"non-finite covariance after propagation at t={sample.timestamp_ns}")
    return state
