"""State augmentation: append the current camera pose as a stochastic clone."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quat import quat_identity, quat_multiply, quat_to_rot, skew
from .state import ATT, CLONE_DIM, CameraClone, FilterState, POS, symmetrize


@dataclass
class Extrinsics:
    """Rigid camera/IMU calibration: q_ci rotates body -> camera, p_ic is the
    camera position in the body frame. Constant for a run."""

    q_ci: np.ndarray = field(default_factory=quat_identity)
    p_ic: np.ndarray = field(default_factory=lambda: np.zeros(3))


def augmentation_jacobian(state: FilterState, ext: Extrinsics) -> np.ndarray:
    """Jacobian of the new clone's error w.r.t. the current error state.

    The clone attitude error is the IMU attitude error rotated into the
    camera frame; the clone position error picks up the IMU position error
    plus the lever-arm coupling with the attitude error.
    """
    n = state.error_dim()
    R_CI = quat_to_rot(ext.q_ci)
    R_GI = quat_to_rot(state.imu.q).T  # body -> global
    J = np.zeros((CLONE_DIM, n))
    J[0:3, ATT] = R_CI
    J[3:6, ATT] = -R_GI @ skew(ext.p_ic)
    J[3:6, POS] = np.eye(3)
    return J


def augment(state: FilterState, ext: Extrinsics, frame_id: int,
            timestamp_ns: int) -> FilterState:
    """Append the camera pose derived from the current IMU estimate.

    Grows the covariance by a 6x6 block through the congruence
    ``[[I], [J]] P [[I], [J]]^T`` so the clone inherits consistent
    cross-correlations with every existing state.
    """
    if any(c.frame_id >= frame_id for c in state.clones):
        raise ValueError(f"frame_id {frame_id} not beyond existing clones")

    q_cg = quat_multiply(ext.q_ci, state.imu.q)
    R_GI = quat_to_rot(state.imu.q).T
    p_c = state.imu.p + R_GI @ ext.p_ic

    J = augmentation_jacobian(state, ext)
    P = state.P
    n = state.error_dim()
    new_P = np.empty((n + CLONE_DIM, n + CLONE_DIM))
    new_P[:n, :n] = P
    PJt = P @ J.T
    new_P[:n, n:] = PJt
    new_P[n:, :n] = PJt.T
    new_P[n:, n:] = J @ PJt

    state.clones.append(CameraClone(q_cg, p_c, frame_id, timestamp_ns))
    state.note_asymmetry(new_P)
    state.P = symmetrize(new_P)
    return state
