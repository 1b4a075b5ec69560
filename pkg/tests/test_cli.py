import numpy as np
import pytest
from click.testing import CliRunner

from fastmsckf import dataio
from fastmsckf.cli import main
from fastmsckf.configio import ConfigError, load_filter, load_scenario


SCENARIO = """
# short circle scenario
trajectory = circle
duration_s = 6.0
seed = 7
landmark_count = 200
circle_period_s = 10.0
"""

FILTER = """
sigma_g = 1e-5
sigma_wg = 1e-6
sigma_a = 1e-4
sigma_wa = 1e-5
sigma_im = 0.002
init_sigma_att = 1e-4
init_sigma_bg = 1e-5
init_sigma_v = 1e-4
init_sigma_ba = 1e-4
init_sigma_p = 1e-6
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "scenario.cfg").write_text(SCENARIO)
    (tmp_path / "filter.cfg").write_text(FILTER)
    return tmp_path


def invoke(*args):
    runner = CliRunner()
    return runner.invoke(main, list(args), catch_exceptions=False)


def test_scenario_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("sigma_gyro = 0.1\n")
    with pytest.raises(ConfigError, match="sigma_gyro"):
        load_scenario(path)


def test_scenario_config_rejects_bad_value(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("duration_s = 0\n")
    with pytest.raises(ConfigError):
        load_scenario(path)


def test_filter_config_defaults(tmp_path):
    path = tmp_path / "f.cfg"
    path.write_text("")
    cfg = load_filter(path, "fmsckf")
    assert cfg.policy.n_pose_max == 20
    assert cfg.policy.n_feat_min == 8
    assert cfg.policy.max_corners == 350
    assert cfg.policy.gate_confidence == 0.95
    assert np.allclose(cfg.gravity, [0, 0, -9.81])


def test_simulate_outputs_deterministic(workdir):
    out1 = workdir / "sim1"
    out2 = workdir / "sim2"
    for out in (out1, out2):
        r = invoke("simulate", "--config", str(workdir / "scenario.cfg"),
                   "--out", str(out))
        assert r.exit_code == 0, r.output
        for name in ("imu.csv", "tracks.csv", "groundtruth.csv"):
            assert (out / name).exists()
    for name in ("imu.csv", "tracks.csv", "groundtruth.csv"):
        assert (out1 / name).read_text() == (out2 / name).read_text()


def test_simulate_bad_config_fails(workdir):
    bad = workdir / "bad.cfg"
    bad.write_text("duration_s = -3\n")
    r = CliRunner().invoke(main, ["simulate", "--config", str(bad),
                                  "--out", str(workdir / "x")])
    assert r.exit_code != 0
    assert "duration" in r.output


def test_run_and_evaluate_and_compare(workdir):
    sim = workdir / "sim"
    invoke("simulate", "--config", str(workdir / "scenario.cfg"),
           "--out", str(sim))
    outs = {}
    for mode in ("msckf", "fmsckf"):
        out = workdir / f"run_{mode}"
        r = invoke("run", "--imu", str(sim / "imu.csv"),
                   "--tracks", str(sim / "tracks.csv"),
                   "--config", str(workdir / "filter.cfg"),
                   "--mode", mode, "--out", str(out),
                   "--groundtruth", str(sim / "groundtruth.csv"),
                   "--init-from-groundtruth")
        assert r.exit_code == 0, r.output
        assert (out / "estimates.csv").exists()
        summary = dataio.read_summary(out / "summary.txt")
        assert summary["mode"] == mode
        assert summary["final_point_error_pct"] < 1.0  # noise-free input
        outs[mode] = out

    ev = workdir / "eval"
    r = invoke("evaluate", "--estimates", str(outs["fmsckf"] / "estimates.csv"),
               "--groundtruth", str(sim / "groundtruth.csv"),
               "--out", str(ev))
    assert r.exit_code == 0, r.output
    for name in ("metrics.txt", "trajectory.csv", "errors.csv",
                 "frame_times.csv", "trajectory.png", "errors.png",
                 "frame_times.png"):
        assert (ev / name).exists(), name

    cmp_dir = workdir / "cmp"
    r = invoke("compare", "--summary-a", str(outs["msckf"] / "summary.txt"),
               "--summary-b", str(outs["fmsckf"] / "summary.txt"),
               "--out", str(cmp_dir))
    assert r.exit_code == 0, r.output
    lines = (cmp_dir / "compare.csv").read_text().strip().splitlines()
    assert lines[0] == "metric,a,b,b_minus_a"
    assert len(lines) > 5


def test_compare_identical_summaries_zero_delta(workdir, tmp_path):
    s = tmp_path / "s.txt"
    dataio.write_summary(s, {"rmse_pos_m": 0.5, "update_events": 4})
    out = tmp_path / "cmp"
    r = invoke("compare", "--summary-a", str(s), "--summary-b", str(s),
               "--out", str(out))
    assert r.exit_code == 0
    for line in (out / "compare.csv").read_text().strip().splitlines()[1:]:
        assert float(line.split(",")[-1]) == 0.0


def test_run_missing_tracks_file(workdir):
    r = CliRunner().invoke(main, [
        "run", "--imu", str(workdir / "scenario.cfg"),
        "--tracks", str(workdir / "nonexistent.csv"),
        "--config", str(workdir / "filter.cfg"),
        "--out", str(workdir / "x")])
    assert r.exit_code != 0


def test_evaluate_disjoint_ranges_fails(workdir, tmp_path):
    est = tmp_path / "est.csv"
    gt = tmp_path / "gt.csv"
    dataio.write_estimates(est, [dataio.EstimateRecord(
        10 ** 15, np.zeros(3), np.array([0, 0, 0, 1.0]), np.zeros(3),
        np.zeros(3), np.zeros(3), 15, 1.0)])
    dataio.write_groundtruth(gt, [(0, np.zeros(3), np.array([0, 0, 0, 1.0]),
                                   np.zeros(3)),
                                  (10 ** 9, np.ones(3),
                                   np.array([0, 0, 0, 1.0]), np.zeros(3))])
    r = CliRunner().invoke(main, ["evaluate", "--estimates", str(est),
                                  "--groundtruth", str(gt),
                                  "--out", str(tmp_path / "ev")])
    assert r.exit_code != 0
    assert "overlap" in r.output


def test_sweep_four_rows(workdir):
    out = workdir / "sweep"
    r = invoke("sweep", "--config", str(workdir / "scenario.cfg"),
               "--filter-config", str(workdir / "filter.cfg"),
               "--values", "4,8,16,32", "--out", str(out))
    assert r.exit_code == 0, r.output
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 5  # header + one row per value
    assert (out / "sweep.png").exists()
    summary = dataio.read_summary(out / "sweep_summary.txt")
    assert "spearman_rho" in summary
