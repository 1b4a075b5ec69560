import numpy as np
import pytest

from fastmsckf.quat import quat_normalize
from fastmsckf.state import CameraClone, FilterState, ImuState, symmetrize
from fastmsckf.triangulate import FeatureTrack


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_quat(rng) -> np.ndarray:
    return quat_normalize(rng.standard_normal(4))


def random_psd(rng, n: int, scale: float = 1.0) -> np.ndarray:
    """Well-conditioned random covariance."""
    A = rng.standard_normal((n, n))
    return symmetrize(scale * (A @ A.T / n + 0.5 * np.eye(n)))


def random_filter_state(rng, n_clones: int = 0, cov_scale: float = 1e-4,
                        spread: float = 1.0) -> FilterState:
    imu = ImuState(q=random_quat(rng), bg=0.01 * rng.standard_normal(3),
                   v=rng.standard_normal(3), ba=0.05 * rng.standard_normal(3),
                   p=spread * rng.standard_normal(3))
    state = FilterState(imu, np.eye(15))
    for i in range(n_clones):
        state.clones.append(CameraClone(
            q=random_quat(rng), p=spread * rng.standard_normal(3),
            frame_id=i, timestamp_ns=int(1e8) * i))
    n = state.error_dim()
    state.P = random_psd(rng, n, cov_scale)
    return state


def arc_clones(n: int, radius: float = 2.0, span: float = 0.8,
               look_at=None) -> list[CameraClone]:
    """Clones on a horizontal arc, optical axes converging on look_at."""
    from fastmsckf.quat import rot_to_quat

    look_at = np.array([0.0, 0.0, 5.0]) if look_at is None else np.asarray(look_at)
    clones = []
    for i in range(n):
        ang = -span / 2 + span * i / max(n - 1, 1)
        p = np.array([radius * np.sin(ang), 0.3 * np.sin(2.5 * ang),
                      radius * (1 - np.cos(ang))])
        z_axis = look_at - p
        z_axis = z_axis / np.linalg.norm(z_axis)
        x_axis = np.cross(np.array([0.0, 1.0, 0.0]), z_axis)
        x_axis = x_axis / np.linalg.norm(x_axis)
        y_axis = np.cross(z_axis, x_axis)
        R_GC = np.column_stack([x_axis, y_axis, z_axis])  # camera -> global
        clones.append(CameraClone(rot_to_quat(R_GC.T), p, i, int(1e8) * i))
    return clones


def exact_track(feature_id: int, p_f, clones, noise: float = 0.0,
                rng=None) -> FeatureTrack:
    """Forward-project a landmark through clones into a track."""
    from fastmsckf.update import predict_observation

    track = FeatureTrack(feature_id)
    for c in clones:
        z, _ = predict_observation(c, p_f)
        if noise > 0:
            z = z + noise * rng.standard_normal(2)
        track.add(c.frame_id, z)
    return track
