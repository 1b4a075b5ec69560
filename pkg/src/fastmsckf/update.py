"""Multi-view feature update: residuals, null-space projection, gating,
measurement compression, and the EKF correction.

Each feature contributes the residuals of all its observations against the
reprojection of its triangulated position. Projecting onto the left
null-space of the feature-position Jacobian removes the (untracked) feature
error from the update, shrinking the useful residual to ``2 n - 3`` rows per
feature seen in ``n`` frames. When the stacked rows outgrow the error-state
dimension, a thin QR factorization compresses the system without changing
the posterior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import chi2

from .quat import quat_to_rot, skew
from .state import CameraClone, FilterState, apply_correction, symmetrize
from .triangulate import FeatureTrack

logger = logging.getLogger(__name__)

DEPTH_EPS = 1e-6


class BehindCamera(ValueError):
    """Predicted depth not positive; the observation cannot be modeled."""


class DegenerateFeature(ValueError):
    """Feature-position Jacobian lost rank; no null-space update possible."""


@dataclass
class FeatureUpdateBlock:
    """Per-feature update rows after null-space projection."""

    feature_id: int
    r: np.ndarray        # (2n-3,)
    H: np.ndarray        # (2n-3, state error dim)
    noise_var: float     # measurement variance; R = noise_var * I

    def rows(self) -> int:
        return self.r.shape[0]


@dataclass
class StackedUpdate:
    H: np.ndarray
    r: np.ndarray
    R: np.ndarray
    compressed: bool


def predict_observation(clone: CameraClone, p_f_global):
    """Project a global feature position into a clone's normalized image."""
    p_cam = quat_to_rot(clone.q) @ (np.asarray(p_f_global, dtype=float) - clone.p)
    if p_cam[2] <= DEPTH_EPS:
        raise BehindCamera(
            f"depth {p_cam[2]:.3e} behind clone {clone.frame_id}")
    return p_cam[:2] / p_cam[2], p_cam


def feature_jacobians(track: FeatureTrack, state: FilterState, p_f_global):
    """Stacked residual and Jacobians for one triangulated feature.

    Returns ``(r_f, H_X, H_f)`` with ``H_X`` zero everywhere except each
    observing clone's 6 columns; the 15 IMU columns are structurally zero
    because the measurements constrain only the stored poses.
    """
    n = state.error_dim()
    n_obs = len(track)
    r_f = np.empty(2 * n_obs)
    H_X = np.zeros((2 * n_obs, n))
    H_f = np.empty((2 * n_obs, 3))

    for i, (fid, z) in enumerate(track.observations):
        idx = state.clone_index(fid)
        clone = state.clones[idx]
        z_hat, p_cam = predict_observation(clone, p_f_global)
        rows = slice(2 * i, 2 * i + 2)
        r_f[rows] = z - z_hat

        Z = p_cam[2]
        J_f = np.array([[1.0, 0.0, -p_cam[0] / Z],
                        [0.0, 1.0, -p_cam[1] / Z]]) / Z
        R_CG = quat_to_rot(clone.q)
        H_f_i = J_f @ R_CG
        H_f[rows] = H_f_i

        off = state.clone_offset(idx)
        H_X[rows, off:off + 3] = J_f @ skew(p_cam)
        H_X[rows, off + 3:off + 6] = -H_f_i
    return r_f, H_X, H_f


def nullspace_project(r_f: np.ndarray, H_X: np.ndarray, H_f: np.ndarray,
                      sigma_im: float, feature_id: int = -1
                      ) -> FeatureUpdateBlock:
    """Eliminate the feature-position error from the linearized system.

    Uses the full QR of H_f; the trailing columns of the orthogonal factor
    span its left null-space, so the projected noise stays isotropic with
    variance sigma_im**2.
    """
    m = H_f.shape[0]
    if m < 5:  # 2n-3 must be positive with margin for one lost rank
        raise DegenerateFeature("too few rows to project")
    Q, R = np.linalg.qr(H_f, mode="complete")
    if np.min(np.abs(np.diag(R[:3, :3]))) < 1e-10 * max(1.0, float(np.abs(R).max())):
        raise DegenerateFeature("feature Jacobian rank < 3")
    A = Q[:, 3:]
    return FeatureUpdateBlock(
        feature_id=feature_id,
        r=A.T @ r_f,
        H=A.T @ H_X,
        noise_var=sigma_im ** 2,
    )


def mahalanobis_gate(block: FeatureUpdateBlock, P: np.ndarray,
                     confidence: float = 0.95) -> bool:
    """Chi-square consistency test on the projected residual."""
    S = block.H @ P @ block.H.T + block.noise_var * np.eye(block.rows())
    try:
        c = scipy.linalg.cho_factor(S)
        gamma = float(block.r @ scipy.linalg.cho_solve(c, block.r))
    except scipy.linalg.LinAlgError:
        logger.warning("feature %d: singular innovation, rejected",
                       block.feature_id)
        return False
    return gamma <= chi2.ppf(confidence, block.rows())


def stack_and_compress(blocks: list[FeatureUpdateBlock], state_dim: int,
                       compress: bool | None = None) -> StackedUpdate:
    """Stack accepted feature blocks and optionally QR-compress.

    Compression triggers when the stacked rows exceed the error-state
    dimension (``compress=None``); it can be forced either way for testing.
    """
    if not blocks:
        raise ValueError("no blocks to stack")
    H = np.vstack([b.H for b in blocks])
    r = np.concatenate([b.r for b in blocks])
    R = np.diag(np.concatenate([np.full(b.rows(), b.noise_var) for b in blocks]))

    do_compress = H.shape[0] > state_dim if compress is None else compress
    if do_compress and H.shape[0] > H.shape[1]:
        Q1, T_H = np.linalg.qr(H, mode="reduced")
        return StackedUpdate(H=T_H, r=Q1.T @ r, R=Q1.T @ R @ Q1,
                             compressed=True)
    return StackedUpdate(H=H, r=r, R=R, compressed=False)


def ekf_update(state: FilterState, upd: StackedUpdate) -> FilterState:
    """Apply the Kalman correction for a stacked measurement.

    A numerically singular innovation aborts the update (the filter keeps
    running on propagation alone) rather than corrupting the state.
    """
    P = state.P
    n = state.error_dim()
    if upd.H.shape[1] != n:
        raise ValueError(f"update has {upd.H.shape[1]} columns, state dim {n}")

    PHt = P @ upd.H.T
    S = upd.H @ PHt + upd.R
    try:
        c = scipy.linalg.cho_factor(symmetrize(S))
        K = scipy.linalg.cho_solve(c, PHt.T).T
    except scipy.linalg.LinAlgError:
        logger.warning("singular innovation (dim %d); update skipped",
                       S.shape[0])
        return state

    P_raw = P - K @ S @ K.T
    state.note_asymmetry(P_raw)
    state.P = symmetrize(P_raw)
    dx = K @ upd.r
    return apply_correction(state, dx)
