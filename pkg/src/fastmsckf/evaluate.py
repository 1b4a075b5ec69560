"""Accuracy and throughput metrics, plus the feature-threshold sweep.

All metrics are pure functions of logs, so recomputing them from persisted
files gives exactly the in-process values. Trajectories are compared after a
single rigid alignment of the initial pose: estimates start wherever the
filter was initialized while ground truth generally does not, and the paper
of record for this kind of comparison is a raw-trajectory overlay from a
common start, not a trajectory-wide fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .dataio import EstimateRecord, GroundTruthRecord, path_length_of
from .quat import (quat_conjugate, quat_multiply, quat_slerp, quat_to_rot,
                   rot_to_quat, rotation_angle)


@dataclass
class PairedSeries:
    t_ns: np.ndarray
    p_est: np.ndarray
    q_est: np.ndarray
    p_gt: np.ndarray
    q_gt: np.ndarray
    path_length: float


def _interp_gt(gt: list[GroundTruthRecord], t_ns: int):
    """Linear position / shortest-path attitude interpolation at t_ns."""
    times = [g.timestamp_ns for g in gt]
    hi = np.searchsorted(times, t_ns)
    if hi == 0:
        return gt[0].p, gt[0].q
    if hi >= len(gt):
        return gt[-1].p, gt[-1].q
    lo = hi - 1
    span = times[hi] - times[lo]
    u = (t_ns - times[lo]) / span if span > 0 else 0.0
    p = (1.0 - u) * gt[lo].p + u * gt[hi].p
    q = quat_slerp(gt[lo].q, gt[hi].q, u)
    return p, q


def align_and_interpolate(records: list[EstimateRecord],
                          gt: list[GroundTruthRecord]) -> PairedSeries:
    """Pair estimates with interpolated ground truth in a common frame."""
    if not records or not gt:
        raise ValueError("empty series")
    t0, t1 = gt[0].timestamp_ns, gt[-1].timestamp_ns
    inside = [r for r in records if t0 <= r.timestamp_ns <= t1]
    if not inside:
        raise ValueError("no temporal overlap between estimates and truth")

    p_gt = np.empty((len(inside), 3))
    q_gt = np.empty((len(inside), 4))
    for i, r in enumerate(inside):
        p_gt[i], q_gt[i] = _interp_gt(gt, r.timestamp_ns)

    # rigid alignment fixing the first estimate pose onto the first truth pose
    R_est0 = quat_to_rot(inside[0].q).T   # body -> world, estimate frame
    R_gt0 = quat_to_rot(q_gt[0]).T
    R_align = R_gt0 @ R_est0.T
    t_align = p_gt[0] - R_align @ inside[0].p

    p_est = np.empty((len(inside), 3))
    q_est = np.empty((len(inside), 4))
    for i, r in enumerate(inside):
        p_est[i] = R_align @ r.p + t_align
        q_est[i] = rot_to_quat((R_align @ quat_to_rot(r.q).T).T)

    gt_positions = np.array([g.p for g in gt
                             if inside[0].timestamp_ns <= g.timestamp_ns
                             <= inside[-1].timestamp_ns])
    length = path_length_of(gt_positions if len(gt_positions) >= 2 else p_gt)
    return PairedSeries(np.array([r.timestamp_ns for r in inside]),
                        p_est, q_est, p_gt, q_gt, length)


def position_errors(paired: PairedSeries) -> np.ndarray:
    return np.linalg.norm(paired.p_est - paired.p_gt, axis=1)


def orientation_errors_deg(paired: PairedSeries) -> np.ndarray:
    out = np.empty(len(paired.t_ns))
    for i in range(len(out)):
        dq = quat_multiply(paired.q_est[i], quat_conjugate(paired.q_gt[i]))
        out[i] = math.degrees(rotation_angle(dq))
    return out


def rmse_position(paired: PairedSeries) -> float:
    e = position_errors(paired)
    return float(np.sqrt(np.mean(e ** 2)))


def rmse_orientation_deg(paired: PairedSeries) -> float:
    e = orientation_errors_deg(paired)
    return float(np.sqrt(np.mean(e ** 2)))


def final_point_error_pct(paired: PairedSeries,
                          path_length: float | None = None) -> float:
    """Final position error as a percentage of the traveled distance."""
    length = paired.path_length if path_length is None else path_length
    if length <= 0:
        raise ValueError("path length must be positive")
    final = float(np.linalg.norm(paired.p_est[-1] - paired.p_gt[-1]))
    return 100.0 * final / length


def euler_zyx_deg(q) -> tuple[float, float, float]:
    """(roll, pitch, yaw) of the body in the world, ZYX convention."""
    R_wb = quat_to_rot(q).T
    pitch = math.asin(max(-1.0, min(1.0, -R_wb[2, 0])))
    roll = math.atan2(R_wb[2, 1], R_wb[2, 2])
    yaw = math.atan2(R_wb[1, 0], R_wb[0, 0])
    return math.degrees(roll), math.degrees(pitch), math.degrees(yaw)


def timing_stats(records: list[EstimateRecord]) -> dict:
    """Frame-time statistics; the update rate is 1 / mean frame time."""
    if not records:
        raise ValueError("empty estimate log")
    times = np.array([r.frame_time_us for r in records])
    mean_us = float(np.mean(times))
    return {
        "mean_frame_time_us": mean_us,
        "median_frame_time_us": float(np.median(times)),
        "p95_frame_time_us": float(np.percentile(times, 95)),
        "update_rate_hz": 1e6 / mean_us if mean_us > 0 else float("inf"),
    }


def summarize(records: list[EstimateRecord], gt: list[GroundTruthRecord],
              counters: dict | None = None) -> dict:
    """The full metric summary a comparison table is built from."""
    paired = align_and_interpolate(records, gt)
    final_delta = paired.p_est[-1] - paired.p_gt[-1]
    roll, pitch, yaw = euler_zyx_deg(paired.q_est[-1])
    g_roll, g_pitch, g_yaw = euler_zyx_deg(paired.q_gt[-1])
    dq = quat_multiply(paired.q_est[-1], quat_conjugate(paired.q_gt[-1]))
    out = {
        "final_x_m": float(paired.p_est[-1][0]),
        "final_y_m": float(paired.p_est[-1][1]),
        "final_z_m": float(paired.p_est[-1][2]),
        "final_err_x_m": float(final_delta[0]),
        "final_err_y_m": float(final_delta[1]),
        "final_err_z_m": float(final_delta[2]),
        "final_point_error_m": float(np.linalg.norm(final_delta)),
        "final_point_error_pct": final_point_error_pct(paired),
        "final_roll_deg": roll,
        "final_pitch_deg": pitch,
        "final_yaw_deg": yaw,
        "final_roll_err_deg": roll - g_roll,
        "final_pitch_err_deg": pitch - g_pitch,
        "final_yaw_err_deg": yaw - g_yaw,
        "final_orientation_error_deg": math.degrees(rotation_angle(dq)),
        "rmse_pos_m": rmse_position(paired),
        "rmse_att_deg": rmse_orientation_deg(paired),
        "path_length_m": paired.path_length,
    }
    out.update(timing_stats(records))
    if counters:
        out.update(counters)
    return out


@dataclass
class SweepRow:
    n_feat_min: int
    final_error_m: float
    update_rate_hz: float      # update events per second of data
    algebra_rate_hz: float     # wall-clock frame throughput
    error_to_rate_ratio: float
    update_events: int
    extraction_events: int


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def spearman(self) -> float:
        """Rank correlation between the threshold and the error/rate ratio."""
        x = [r.n_feat_min for r in self.rows]
        y = [r.error_to_rate_ratio for r in self.rows]
        if len(set(y)) <= 1:
            return 0.0
        rho, _ = spearmanr(x, y)
        return float(rho)


def nfmin_sweep(run_one, values: list[int]) -> SweepResult:
    """Run the keyframe policy at each feature threshold.

    ``run_one(n_feat_min) -> (records, gt, counters)`` must replay the
    identical scenario and seed; only the threshold may vary.

    The ratio divides the final position error by the rate of filter
    updates in data time. Dividing by wall-clock throughput instead would
    let the shrinking pose window dominate the denominator, since the
    extraction cost that balances it in a full system sits outside this
    artifact's boundary; the event rate is bounded by the camera rate and
    keeps the comparison about estimation quality.
    """
    if len(values) < 2:
        raise ValueError("need at least two sweep values")
    result = SweepResult()
    for v in values:
        records, gt, counters = run_one(v)
        paired = align_and_interpolate(records, gt)
        stats = timing_stats(records)
        err = float(np.linalg.norm(paired.p_est[-1] - paired.p_gt[-1]))
        span_s = (records[-1].timestamp_ns - records[0].timestamp_ns) * 1e-9
        events = counters.get("update_events", 0)
        rate = events / span_s if span_s > 0 else 0.0
        # a run that never updates is pure dead reckoning: worst ratio
        ratio = err / rate if rate > 0 else math.inf
        result.rows.append(SweepRow(
            n_feat_min=v, final_error_m=err, update_rate_hz=rate,
            algebra_rate_hz=stats["update_rate_hz"],
            error_to_rate_ratio=ratio,
            update_events=events,
            extraction_events=counters.get("extraction_events", 0)))
    return result
