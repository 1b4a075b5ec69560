"""Synthetic scenario generation: analytic trajectories, landmark fields,
noisy inertial samples and noisy feature tracks.

The generator is the verification oracle for the whole filter: every output
is an exact function of closed-form kinematics plus seeded noise, so a run
with zero noise must be recoverable by the filter to integration accuracy.

Noise scaling follows the continuous-density convention: a white-noise
density ``sigma`` becomes a per-sample std ``sigma / sqrt(dt)``, and a bias
random walk density ``sigma_w`` adds increments with std ``sigma_w * sqrt(dt)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .augment import Extrinsics
from .propagation import ImuSample, NoiseConfig
from .quat import quat_to_rot, rot_to_quat

TRAJECTORY_KINDS = ("circle", "lissajous", "straight")


@dataclass
class ScenarioConfig:
    trajectory: str = "circle"
    duration_s: float = 60.0
    imu_rate_hz: float = 200.0
    cam_rate_hz: float = 10.0
    seed: int = 0

    landmark_count: int = 300
    # circle: camera sweeps the inner wall of a landmark cylinder
    circle_radius_m: float = 5.0
    circle_period_s: float = 10.0
    height_m: float = 1.5
    wall_radius_min_m: float = 8.0
    wall_radius_max_m: float = 13.0
    wall_z_min_m: float = -0.5
    wall_z_max_m: float = 3.5
    # lissajous / straight: camera looks up at a landmark ceiling
    lissajous_amp_m: float = 3.0
    ceiling_z_m: float = 8.0
    straight_speed_mps: float = 1.0

    fov_half_angle_rad: float = 0.6

    def __post_init__(self):
        if self.trajectory not in TRAJECTORY_KINDS:
            raise ValueError(f"unknown trajectory {self.trajectory!r}")
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.imu_rate_hz < 2 * self.cam_rate_hz:
            raise ValueError("imu rate must be at least twice the camera rate")


@dataclass
class GroundTruth:
    t_ns: np.ndarray          # (N,), int64, IMU-rate timestamps
    q: np.ndarray             # (N, 4), global -> body, scalar last
    p: np.ndarray             # (N, 3)
    v: np.ndarray             # (N, 3)
    a: np.ndarray             # (N, 3), global-frame acceleration
    w_body: np.ndarray        # (N, 3), body-frame angular rate
    landmarks: np.ndarray     # (M, 3)
    cam_stride: int           # camera frame every cam_stride-th IMU sample

    def camera_indices(self) -> np.ndarray:
        return np.arange(0, len(self.t_ns), self.cam_stride)


@dataclass
class FrameObservations:
    timestamp_ns: int
    frame_id: int
    observations: list[tuple[int, np.ndarray]] = field(default_factory=list)


def _circle_state(cfg: ScenarioConfig, t: float):
    rate = 2.0 * math.pi / cfg.circle_period_s
    th = rate * t
    c, s = math.cos(th), math.sin(th)
    r = cfg.circle_radius_m
    p = np.array([r * c, r * s, cfg.height_m])
    v = np.array([-r * rate * s, r * rate * c, 0.0])
    a = np.array([-r * rate * rate * c, -r * rate * rate * s, 0.0])
    # body axes in global coords: x tangent, y world-up, z radially out,
    # so an identity-extrinsic camera looks at the surrounding wall
    x_b = np.array([-s, c, 0.0])
    y_b = np.array([0.0, 0.0, 1.0])
    z_b = np.array([c, s, 0.0])
    R_GI = np.column_stack([x_b, y_b, z_b])
    w_body = R_GI.T @ np.array([0.0, 0.0, rate])
    return p, v, a, R_GI.T, w_body


def _lissajous_state(cfg: ScenarioConfig, t: float):
    A = cfg.lissajous_amp_m
    fx, fy = 2.0 * math.pi / 20.0, 2.0 * math.pi / 14.0
    p = np.array([A * math.sin(fx * t), A * math.sin(fy * t), cfg.height_m])
    v = np.array([A * fx * math.cos(fx * t), A * fy * math.cos(fy * t), 0.0])
    a = np.array([-A * fx * fx * math.sin(fx * t),
                  -A * fy * fy * math.sin(fy * t), 0.0])
    # fixed attitude, optical axis up at the ceiling
    return p, v, a, np.eye(3), np.zeros(3)


def _straight_state(cfg: ScenarioConfig, t: float):
    vel = np.array([cfg.straight_speed_mps, 0.0, 0.0])
    p = vel * t + np.array([0.0, 0.0, cfg.height_m])
    return p, vel, np.zeros(3), np.eye(3), np.zeros(3)


_KINDS = {
    "circle": _circle_state,
    "lissajous": _lissajous_state,
    "straight": _straight_state,
}


def _make_landmarks(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    m = cfg.landmark_count
    if cfg.trajectory == "circle":
        az = rng.uniform(0.0, 2.0 * math.pi, m)
        rad = rng.uniform(cfg.wall_radius_min_m, cfg.wall_radius_max_m, m)
        z = rng.uniform(cfg.wall_z_min_m, cfg.wall_z_max_m, m)
        return np.column_stack([rad * np.cos(az), rad * np.sin(az), z])
    # ceiling sheet above the whole workspace
    span = cfg.lissajous_amp_m + cfg.straight_speed_mps * cfg.duration_s
    xy = rng.uniform(-span - 5.0, span + 5.0, (m, 2))
    z = rng.uniform(cfg.ceiling_z_m, cfg.ceiling_z_m + 2.0, m)
    return np.column_stack([xy, z])


def generate_trajectory(cfg: ScenarioConfig) -> GroundTruth:
    """Sample the analytic trajectory at the IMU rate; deterministic per seed."""
    n = int(round(cfg.duration_s * cfg.imu_rate_hz)) + 1
    t_ns = np.array([round(i * 1e9 / cfg.imu_rate_hz) for i in range(n)],
                    dtype=np.int64)
    kind = _KINDS[cfg.trajectory]
    q = np.empty((n, 4))
    p = np.empty((n, 3))
    v = np.empty((n, 3))
    a = np.empty((n, 3))
    w = np.empty((n, 3))
    for i in range(n):
        t = t_ns[i] * 1e-9
        p[i], v[i], a[i], R_IG, w[i] = kind(cfg, t)
        q[i] = rot_to_quat(R_IG)
    rng = np.random.default_rng([cfg.seed, 0])
    landmarks = _make_landmarks(cfg, rng)
    stride = int(round(cfg.imu_rate_hz / cfg.cam_rate_hz))
    return GroundTruth(t_ns, q, p, v, a, w, landmarks, stride)


def synthesize_imu(gt: GroundTruth, noise: NoiseConfig, gyro_bias0=None,
                   accel_bias0=None, seed: int = 0):
    """Invert the sensor models over the true kinematics.

    Returns the sample list and the (N, 6) array of true bias trajectories
    (gyro then accel) actually applied, so runs can be initialized and
    scored against them.
    """
    rng = np.random.default_rng([seed, 1])
    n = len(gt.t_ns)
    gravity = np.array([0.0, 0.0, -9.81])
    bg = np.zeros(3) if gyro_bias0 is None else np.asarray(gyro_bias0, float)
    ba = np.zeros(3) if accel_bias0 is None else np.asarray(accel_bias0, float)
    bg = bg.copy()
    ba = ba.copy()

    samples = []
    biases = np.empty((n, 6))
    prev_t = None
    for i in range(n):
        t = gt.t_ns[i] * 1e-9
        dt = (t - prev_t) if prev_t is not None else 1.0 / 200.0
        prev_t = t
        if i > 0:
            bg = bg + noise.sigma_wg * math.sqrt(dt) * rng.standard_normal(3)
            ba = ba + noise.sigma_wa * math.sqrt(dt) * rng.standard_normal(3)
        biases[i, :3] = bg
        biases[i, 3:] = ba
        R_IG = quat_to_rot(gt.q[i])
        w_m = gt.w_body[i] + bg
        a_m = R_IG @ (gt.a[i] - gravity) + ba
        if noise.sigma_g > 0:
            w_m = w_m + noise.sigma_g / math.sqrt(dt) * rng.standard_normal(3)
        if noise.sigma_a > 0:
            a_m = a_m + noise.sigma_a / math.sqrt(dt) * rng.standard_normal(3)
        samples.append(ImuSample(int(gt.t_ns[i]), w_m, a_m))
    return samples, biases


def camera_pose(q_imu, p_imu, ext: Extrinsics):
    """True camera pose from a true IMU pose and the extrinsics."""
    R_IG = quat_to_rot(q_imu)
    R_CG = quat_to_rot(ext.q_ci) @ R_IG
    p_c = p_imu + R_IG.T @ ext.p_ic
    return R_CG, p_c


def synthesize_tracks(gt: GroundTruth, cfg: ScenarioConfig, ext: Extrinsics,
                      sigma_im: float, seed: int = 0) -> list[FrameObservations]:
    """Project every landmark visible in each camera frame.

    Feature ids are persistent while a landmark stays inside the view cone;
    leaving ends the track and re-entry is assigned a fresh id. Which of
    these detections become tracked features is the replay policy's call,
    so the emitted stream is policy-agnostic.
    """
    rng = np.random.default_rng([seed, 2])
    tan_fov = math.tan(cfg.fov_half_angle_rad)
    current_id: dict[int, int] = {}
    next_id = 0
    frames = []
    for frame_id, i in enumerate(gt.camera_indices()):
        R_CG, p_c = camera_pose(gt.q[i], gt.p[i], ext)
        rel = (gt.landmarks - p_c) @ R_CG.T
        depths = rel[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = rel[:, 0] / depths
            w = rel[:, 1] / depths
        visible = (depths > 1e-6) & (np.hypot(u, w) <= tan_fov)

        obs = []
        for lm in np.flatnonzero(visible):
            lm = int(lm)
            fid = current_id.get(lm)
            if fid is None:
                fid = next_id
                next_id += 1
                current_id[lm] = fid
            z = np.array([u[lm], w[lm]])
            if sigma_im > 0:
                z = z + sigma_im * rng.standard_normal(2)
            obs.append((fid, z))
        gone = [lm for lm in current_id if not visible[lm]]
        for lm in gone:
            del current_id[lm]
        frames.append(FrameObservations(int(gt.t_ns[i]), frame_id, obs))
    return frames
