"""Flat key-value configuration files for scenarios and filter runs.

A config file holds ``key = value`` lines; ``#`` starts a comment. Every
key has a default, vectors are comma-separated, and unknown keys are errors
so a mistyped noise parameter cannot silently fall back to a default.

Scenario keys (units in brackets):

    trajectory            circle | lissajous | straight
    duration_s            [s]      60.0
    imu_rate_hz           [Hz]     200.0
    cam_rate_hz           [Hz]     10.0
    seed                  [-]      0
    landmark_count        [-]      300
    circle_radius_m       [m]      5.0
    circle_period_s       [s]      10.0
    height_m              [m]      1.5
    wall_radius_min_m     [m]      8.0
    wall_radius_max_m     [m]      13.0
    wall_z_min_m          [m]      -0.5
    wall_z_max_m          [m]      3.5
    lissajous_amp_m       [m]      3.0
    ceiling_z_m           [m]      8.0
    straight_speed_mps    [m/s]    1.0
    fov_half_angle_rad    [rad]    0.6
    sigma_g               [rad/s/sqrt(Hz)]   0.0
    sigma_wg              [rad/s^2/sqrt(Hz)] 0.0
    sigma_a               [m/s^2/sqrt(Hz)]   0.0
    sigma_wa              [m/s^3/sqrt(Hz)]   0.0
    sigma_im              [-]      0.0
    gyro_bias_init        [rad/s]  0,0,0
    accel_bias_init       [m/s^2]  0,0,0
    q_ci                  [xyzw]   0,0,0,1   camera mount used for projection
    p_ic                  [m]      0,0,0

Filter keys:

    sigma_g / sigma_wg / sigma_a / sigma_wa    filter noise densities
    sigma_im              [-]      0.002
    gravity               [m/s^2]  0,0,-9.81
    q_ci                  [xyzw]   0,0,0,1
    p_ic                  [m]      0,0,0
    n_pose_max            [-]      20
    n_feat_min            [-]      8
    max_corners           [-]      350
    gate_confidence       [-]      0.95
    init_sigma_att        [rad]    1e-2
    init_sigma_bg         [rad/s]  1e-3
    init_sigma_v          [m/s]    0.0
    init_sigma_ba         [m/s^2]  1e-2
    init_sigma_p          [m]      0.0
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import Extrinsics
from .pipeline import PipelineConfig
from .policy import PolicyConfig
from .propagation import NoiseConfig
from .sim import ScenarioConfig
from .state import InitialConditions


class ConfigError(ValueError):
    pass


def parse_kv_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _vector(text: str, n: int, key: str) -> np.ndarray:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated values")
    return np.array([float(p) for p in parts])


_SCENARIO_SCALARS = {
    "duration_s": float, "imu_rate_hz": float, "cam_rate_hz": float,
    "seed": int, "landmark_count": int, "circle_radius_m": float,
    "circle_period_s": float, "height_m": float, "wall_radius_min_m": float,
    "wall_radius_max_m": float, "wall_z_min_m": float, "wall_z_max_m": float,
    "lissajous_amp_m": float, "ceiling_z_m": float,
    "straight_speed_mps": float, "fov_half_angle_rad": float,
    "sigma_g": float, "sigma_wg": float, "sigma_a": float, "sigma_wa": float,
    "sigma_im": float,
}
_SCENARIO_VECTORS = {"gyro_bias_init": 3, "accel_bias_init": 3, "q_ci": 4,
                     "p_ic": 3}


@dataclass
class ScenarioFile:
    """Scenario geometry plus the generation noise, biases and camera mount."""

    scenario: ScenarioConfig
    sigma_g: float = 0.0
    sigma_wg: float = 0.0
    sigma_a: float = 0.0
    sigma_wa: float = 0.0
    sigma_im: float = 0.0
    gyro_bias_init: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_bias_init: np.ndarray = field(default_factory=lambda: np.zeros(3))
    extrinsics: Extrinsics = field(default_factory=Extrinsics)


def load_scenario(path) -> ScenarioFile:
    kv = parse_kv_file(path)
    known = {"trajectory", *_SCENARIO_SCALARS, *_SCENARIO_VECTORS}
    unknown = set(kv) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")

    scen_kwargs = {}
    extra = {}
    if "trajectory" in kv:
        scen_kwargs["trajectory"] = kv["trajectory"]
    for key, cast in _SCENARIO_SCALARS.items():
        if key not in kv:
            continue
        try:
            val = cast(float(kv[key])) if cast is int else cast(kv[key])
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {kv[key]!r}")
        if key in ("sigma_g", "sigma_wg", "sigma_a", "sigma_wa", "sigma_im"):
            extra[key] = val
        else:
            scen_kwargs[key] = val
    try:
        scenario = ScenarioConfig(**scen_kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    out = ScenarioFile(scenario, **extra)
    if "gyro_bias_init" in kv:
        out.gyro_bias_init = _vector(kv["gyro_bias_init"], 3, "gyro_bias_init")
    if "accel_bias_init" in kv:
        out.accel_bias_init = _vector(kv["accel_bias_init"], 3,
                                      "accel_bias_init")
    if "q_ci" in kv:
        q = _vector(kv["q_ci"], 4, "q_ci")
        out.extrinsics.q_ci = q / np.linalg.norm(q)
    if "p_ic" in kv:
        out.extrinsics.p_ic = _vector(kv["p_ic"], 3, "p_ic")
    return out


_FILTER_SCALARS = {
    "sigma_g": float, "sigma_wg": float, "sigma_a": float, "sigma_wa": float,
    "sigma_im": float, "n_pose_max": int, "n_feat_min": int,
    "max_corners": int, "gate_confidence": float,
    "init_sigma_att": float, "init_sigma_bg": float, "init_sigma_v": float,
    "init_sigma_ba": float, "init_sigma_p": float,
}
_FILTER_VECTORS = {"gravity": 3, "q_ci": 4, "p_ic": 3}


def load_filter(path, mode: str) -> PipelineConfig:
    kv = parse_kv_file(path)
    known = set(_FILTER_SCALARS) | set(_FILTER_VECTORS)
    unknown = set(kv) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")

    vals = {}
    for key, cast in _FILTER_SCALARS.items():
        if key in kv:
            try:
                vals[key] = cast(float(kv[key])) if cast is int \
                    else cast(kv[key])
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key}: {kv[key]!r}")

    noise_kwargs = {k: vals[k] for k in
                    ("sigma_g", "sigma_wg", "sigma_a", "sigma_wa", "sigma_im")
                    if k in vals}
    policy_kwargs = {k: vals[k] for k in
                     ("n_pose_max", "n_feat_min", "max_corners",
                      "gate_confidence") if k in vals}
    init_kwargs = {k.removeprefix("init_"): vals[k] for k in
                   ("init_sigma_att", "init_sigma_bg", "init_sigma_v",
                    "init_sigma_ba", "init_sigma_p") if k in vals}

    ext = Extrinsics()
    if "q_ci" in kv:
        q = _vector(kv["q_ci"], 4, "q_ci")
        ext.q_ci = q / np.linalg.norm(q)
    if "p_ic" in kv:
        ext.p_ic = _vector(kv["p_ic"], 3, "p_ic")
    gravity = _vector(kv["gravity"], 3, "gravity") if "gravity" in kv \
        else np.array([0.0, 0.0, -9.81])

    try:
        return PipelineConfig(
            noise=NoiseConfig(**noise_kwargs),
            policy=PolicyConfig(mode=mode, **policy_kwargs),
            extrinsics=ext,
            gravity=gravity,
            init=InitialConditions(**init_kwargs),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
