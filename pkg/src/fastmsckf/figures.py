"""Render the report figures next to their delimited tables.

Every figure here is a straight plot of a table the evaluation commands
already write, so the PNGs carry no information the CSVs do not; they exist
for quick visual inspection of a run.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import PairedSeries, SweepResult, orientation_errors_deg, position_errors


def _time_axis(t_ns: np.ndarray) -> np.ndarray:
    return (t_ns - t_ns[0]) * 1e-9


def save_trajectory_figure(paired: PairedSeries, path) -> None:
    fig, (ax_xy, ax_xz) = plt.subplots(1, 2, figsize=(10, 4.5))
    for ax, k, name in ((ax_xy, 1, "XY"), (ax_xz, 2, "XZ")):
        ax.plot(paired.p_gt[:, 0], paired.p_gt[:, k], "k-", label="truth")
        ax.plot(paired.p_est[:, 0], paired.p_est[:, k], "g--", label="estimate")
        ax.plot(paired.p_gt[0, 0], paired.p_gt[0, k], "ks", ms=7)
        ax.plot(paired.p_est[-1, 0], paired.p_est[-1, k], "go", ms=7)
        ax.plot(paired.p_gt[-1, 0], paired.p_gt[-1, k], "ko", ms=7, mfc="none")
        ax.set_xlabel("x [m]")
        ax.set_ylabel(f"{name[1].lower()} [m]")
        ax.set_title(f"trajectory, {name} plane")
        ax.axis("equal")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_error_figure(paired: PairedSeries, path) -> None:
    t = _time_axis(paired.t_ns)
    fig, (ax_p, ax_q) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_p.plot(t, position_errors(paired), "b-")
    ax_p.set_ylabel("position error [m]")
    ax_q.plot(t, orientation_errors_deg(paired), "r-")
    ax_q.set_ylabel("orientation error [deg]")
    ax_q.set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_timing_figure(t_ns: np.ndarray, frame_times_us: np.ndarray, path,
                       label: str = "") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(_time_axis(np.asarray(t_ns)), np.asarray(frame_times_us) * 1e-3,
            "b.", ms=3, label=label or None)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frame processing time [ms]")
    if label:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_figure(sweep: SweepResult, path) -> None:
    pts = [(r.n_feat_min, r.error_to_rate_ratio) for r in sweep.rows
           if np.isfinite(r.error_to_rate_ratio)]
    fig, ax = plt.subplots(figsize=(6, 4))
    if pts:
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "bo-")
    ax.set_xlabel("minimum tracked-feature count")
    ax.set_ylabel("error / update rate [m s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
