"""Batch command-line entry points wiring the pipeline together.

Commands::

    fastmsckf simulate  --config scenario.cfg --out DIR
    fastmsckf run       --imu imu.csv --tracks tracks.csv --config filter.cfg
                        --mode {msckf,fmsckf} --out DIR
                        [--groundtruth gt.csv] [--init-from-groundtruth]
    fastmsckf evaluate  --estimates est.csv --groundtruth gt.csv --out DIR
    fastmsckf compare   --summary-a a.txt --summary-b b.txt --out DIR
    fastmsckf sweep     --config scenario.cfg --filter-config filter.cfg
                        --values 4,8,16,32 --out DIR

All randomness flows from the seeds in the config files. Exit code is zero
only when the whole pipeline completed and every declared output was
written.
"""

from __future__ import annotations

import pathlib

import click
import numpy as np

from . import configio, dataio, evaluate, figures
from .pipeline import VioPipeline
from .policy import MODE_FMSCKF, MODE_MSCKF
from .propagation import NoiseConfig
from .sim import generate_trajectory, synthesize_imu, synthesize_tracks


def _fail(exc) -> None:
    raise click.ClickException(str(exc))


def _outdir(path) -> pathlib.Path:
    out = pathlib.Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def main() -> None:
    """Visual-inertial odometry toolkit: simulate, replay, evaluate."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def simulate(config_path, out_dir) -> None:
    """Generate IMU, track and ground-truth files for a scenario."""
    try:
        sf = configio.load_scenario(config_path)
    except (configio.ConfigError, ValueError) as exc:
        _fail(exc)
    out = _outdir(out_dir)
    gt = generate_trajectory(sf.scenario)
    gen_noise = NoiseConfig(sigma_g=sf.sigma_g, sigma_wg=sf.sigma_wg,
                            sigma_a=sf.sigma_a, sigma_wa=sf.sigma_wa,
                            sigma_im=max(sf.sigma_im, 1e-12))
    samples, biases = synthesize_imu(gt, gen_noise, sf.gyro_bias_init,
                                     sf.accel_bias_init, seed=sf.scenario.seed)
    frames = synthesize_tracks(gt, sf.scenario, sf.extrinsics,
                               sf.sigma_im, seed=sf.scenario.seed)
    dataio.write_imu(out / "imu.csv", samples)
    dataio.write_tracks(out / "tracks.csv", frames)
    dataio.write_groundtruth(
        out / "groundtruth.csv",
        [(gt.t_ns[i], gt.p[i], gt.q[i], gt.v[i], biases[i, :3], biases[i, 3:])
         for i in range(len(gt.t_ns))])
    click.echo(f"wrote imu.csv, tracks.csv, groundtruth.csv to {out}")


@main.command()
@click.option("--imu", "imu_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tracks", "tracks_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice([MODE_MSCKF, MODE_FMSCKF]),
              default=MODE_FMSCKF, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--groundtruth", "gt_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="adds accuracy metrics to the summary")
@click.option("--init-from-groundtruth", is_flag=True,
              help="start the filter at the first ground-truth pose")
def run(imu_path, tracks_path, config_path, mode, out_dir, gt_path,
        init_from_groundtruth) -> None:
    """Replay a merged IMU + track stream through the filter."""
    try:
        cfg = configio.load_filter(config_path, mode)
    except configio.ConfigError as exc:
        _fail(exc)
    if init_from_groundtruth:
        if gt_path is None:
            _fail("--init-from-groundtruth requires --groundtruth")
        first = next(iter(dataio.read_groundtruth(gt_path)), None)
        if first is None:
            _fail(f"{gt_path}: empty ground truth")
        cfg.init.q = first.q
        cfg.init.p = first.p
        cfg.init.v = first.v

    out = _outdir(out_dir)
    pipeline = VioPipeline(cfg)
    try:
        result = pipeline.run(dataio.read_imu(imu_path),
                              dataio.read_tracks(tracks_path))
    except (dataio.DataFormatError, ValueError, RuntimeError) as exc:
        _fail(exc)
    if not result.records:
        _fail("no camera frames processed")

    dataio.write_estimates(out / "estimates.csv", result.records)
    summary = {
        "mode": mode,
        "frames": len(result.records),
        "update_events": result.ledger.update_events,
        "extraction_events": result.ledger.extraction_events,
        "prune_events": result.ledger.prune_events,
        "tracks_started": result.ledger.tracks_started,
    }
    summary.update(evaluate.timing_stats(result.records))
    if gt_path is not None:
        gt = list(dataio.read_groundtruth(gt_path))
        try:
            summary.update(evaluate.summarize(result.records, gt))
        except ValueError as exc:
            _fail(exc)
    dataio.write_summary(out / "summary.txt", summary)
    click.echo(f"wrote estimates.csv and summary.txt to {out}")


def _paired_tables(paired, out) -> None:
    dataio.write_table(
        out / "trajectory.csv",
        ["t_ns", "est_x", "est_y", "est_z", "gt_x", "gt_y", "gt_z"],
        [(int(paired.t_ns[i]), *paired.p_est[i], *paired.p_gt[i])
         for i in range(len(paired.t_ns))])
    pos_err = evaluate.position_errors(paired)
    att_err = evaluate.orientation_errors_deg(paired)
    dataio.write_table(
        out / "errors.csv",
        ["t_ns", "position_error_m", "orientation_error_deg"],
        [(int(paired.t_ns[i]), pos_err[i], att_err[i])
         for i in range(len(paired.t_ns))])


@main.command(name="evaluate")
@click.option("--estimates", "est_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--groundtruth", "gt_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def evaluate_cmd(est_path, gt_path, out_dir) -> None:
    """Score an estimate log against ground truth."""
    out = _outdir(out_dir)
    try:
        records = list(dataio.read_estimates(est_path))
        gt = list(dataio.read_groundtruth(gt_path))
        paired = evaluate.align_and_interpolate(records, gt)
        summary = evaluate.summarize(records, gt)
    except (dataio.DataFormatError, ValueError) as exc:
        _fail(exc)
    dataio.write_summary(out / "metrics.txt", summary)
    _paired_tables(paired, out)
    t_ns = np.array([r.timestamp_ns for r in records])
    times = np.array([r.frame_time_us for r in records])
    dataio.write_table(out / "frame_times.csv", ["t_ns", "frame_time_us"],
                       [(int(t), ft) for t, ft in zip(t_ns, times)])
    figures.save_trajectory_figure(paired, out / "trajectory.png")
    figures.save_error_figure(paired, out / "errors.png")
    figures.save_timing_figure(t_ns, times, out / "frame_times.png")
    click.echo(f"wrote metrics.txt, tables and figures to {out}")


@main.command()
@click.option("--summary-a", "path_a", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--summary-b", "path_b", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def compare(path_a, path_b, out_dir) -> None:
    """Side-by-side metric rows for two run summaries."""
    out = _outdir(out_dir)
    try:
        a = dataio.read_summary(path_a)
        b = dataio.read_summary(path_b)
    except dataio.DataFormatError as exc:
        _fail(exc)
    keys = [k for k in a if k in b
            and isinstance(a[k], (int, float)) and isinstance(b[k], (int, float))]
    rows = [(k, float(a[k]), float(b[k]), float(b[k]) - float(a[k]))
            for k in keys]
    dataio.write_table(out / "compare.csv", ["metric", "a", "b", "b_minus_a"],
                       rows)
    click.echo(f"wrote compare.csv to {out}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--filter-config", "filter_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--values", default="4,8,16,32", show_default=True,
              help="comma-separated feature thresholds")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def sweep(config_path, filter_path, values, out_dir) -> None:
    """Error-to-rate curve over the keyframe feature threshold."""
    try:
        sf = configio.load_scenario(config_path)
        base_cfg = configio.load_filter(filter_path, MODE_FMSCKF)
        vals = [int(v) for v in values.split(",") if v.strip()]
    except (configio.ConfigError, ValueError) as exc:
        _fail(exc)
    out = _outdir(out_dir)

    gt = generate_trajectory(sf.scenario)
    gen_noise = NoiseConfig(sigma_g=sf.sigma_g, sigma_wg=sf.sigma_wg,
                            sigma_a=sf.sigma_a, sigma_wa=sf.sigma_wa,
                            sigma_im=max(sf.sigma_im, 1e-12))
    samples, _ = synthesize_imu(gt, gen_noise, sf.gyro_bias_init,
                                sf.accel_bias_init, seed=sf.scenario.seed)
    frames = synthesize_tracks(gt, sf.scenario, sf.extrinsics,
                               sf.sigma_im, seed=sf.scenario.seed)
    gt_records = [dataio.GroundTruthRecord(int(gt.t_ns[i]), gt.p[i], gt.q[i],
                                           gt.v[i])
                  for i in range(len(gt.t_ns))]

    def run_one(n_feat_min):
        cfg = configio.load_filter(filter_path, MODE_FMSCKF)
        cfg.policy.n_feat_min = n_feat_min
        cfg.init.q, cfg.init.p, cfg.init.v = gt.q[0], gt.p[0], gt.v[0]
        pipe = VioPipeline(cfg)
        result = pipe.run(iter(samples), iter(frames))
        counters = {"update_events": result.ledger.update_events,
                    "extraction_events": result.ledger.extraction_events}
        return result.records, gt_records, counters

    try:
        result = evaluate.nfmin_sweep(run_one, vals)
    except ValueError as exc:
        _fail(exc)
    dataio.write_table(
        out / "sweep.csv",
        ["n_feat_min", "final_error_m", "update_rate_hz", "algebra_rate_hz",
         "error_to_rate_ratio", "update_events", "extraction_events"],
        [(r.n_feat_min, r.final_error_m, r.update_rate_hz, r.algebra_rate_hz,
          r.error_to_rate_ratio, r.update_events, r.extraction_events)
         for r in result.rows])
    dataio.write_summary(out / "sweep_summary.txt",
                         {"spearman_rho": result.spearman()})
    figures.save_sweep_figure(result, out / "sweep.png")
    click.echo(f"wrote sweep.csv, sweep_summary.txt, sweep.png to {out}")


if __name__ == "__main__":
    main()
