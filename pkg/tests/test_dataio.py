import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastmsckf import dataio
from fastmsckf.propagation import ImuSample, NoiseConfig
from fastmsckf.sim import (FrameObservations, ScenarioConfig,
                           generate_trajectory, synthesize_imu)


EUROC_IMU_HEADER = ("#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],"
                    "w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],"
                    "a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n")


def test_read_imu_skips_euroc_header(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(EUROC_IMU_HEADER +
                    "1403636579758555392,-0.099134701513277898,"
                    "0.14730578886832138,0.02722713633111154,"
                    "8.1476917083333333,-0.37592158333333331,"
                    "-2.4026292499999999\n")
    samples = list(dataio.read_imu(path))
    assert len(samples) == 1
    assert samples[0].timestamp_ns == 1403636579758555392
    assert samples[0].w[1] == 0.14730578886832138


def test_read_imu_wrong_field_count(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("100,1,2,3,4,5\n")
    with pytest.raises(dataio.DataFormatError) as err:
        list(dataio.read_imu(path))
    assert ":1:" in str(err.value)


def test_read_imu_nonmonotone_timestamp(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("100,1,2,3,4,5,6\n99,1,2,3,4,5,6\n")
    with pytest.raises(dataio.DataFormatError):
        list(dataio.read_imu(path))


def test_imu_round_trip_exact(tmp_path):
    cfg = ScenarioConfig(duration_s=1.0, seed=2, landmark_count=5)
    gt = generate_trajectory(cfg)
    samples, _ = synthesize_imu(gt, NoiseConfig(), seed=2)
    path = tmp_path / "imu.csv"
    dataio.write_imu(path, samples)
    back = list(dataio.read_imu(path))
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        assert a.timestamp_ns == b.timestamp_ns
        assert np.array_equal(a.w, b.w)
        assert np.array_equal(a.a, b.a)


def test_groundtruth_round_trip(tmp_path):
    cfg = ScenarioConfig(duration_s=0.5, seed=2, landmark_count=5)
    gt = generate_trajectory(cfg)
    path = tmp_path / "gt.csv"
    rows = [(gt.t_ns[i], gt.p[i], gt.q[i], gt.v[i])
            for i in range(len(gt.t_ns))]
    dataio.write_groundtruth(path, rows)
    back = list(dataio.read_groundtruth(path))
    assert len(back) == len(rows)
    for rec, i in zip(back, range(len(rows))):
        assert rec.timestamp_ns == int(gt.t_ns[i])
        assert np.array_equal(rec.p, gt.p[i])
        assert np.allclose(rec.q, gt.q[i], atol=1e-15)
        assert np.array_equal(rec.v, gt.v[i])


def test_groundtruth_empty_file_ok(tmp_path):
    path = tmp_path / "gt.csv"
    path.write_text("#header only\n")
    assert list(dataio.read_groundtruth(path)) == []


def test_groundtruth_out_of_order(tmp_path):
    path = tmp_path / "gt.csv"
    row = ",".join(["9"] + ["0.0"] * 3 + ["1.0", "0.0", "0.0", "0.0"]
                   + ["0.0"] * 3)
    row2 = ",".join(["5"] + ["0.0"] * 3 + ["1.0", "0.0", "0.0", "0.0"]
                    + ["0.0"] * 3)
    path.write_text(row + "\n" + row2 + "\n")
    with pytest.raises(dataio.DataFormatError):
        list(dataio.read_groundtruth(path))


def test_groundtruth_renormalizes_and_warns(tmp_path, caplog):
    path = tmp_path / "gt.csv"
    row = ",".join(["5"] + ["0.0"] * 3 + ["1.01", "0.0", "0.0", "0.0"]
                   + ["0.0"] * 3)
    path.write_text(row + "\n")
    with caplog.at_level("WARNING"):
        recs = list(dataio.read_groundtruth(path))
    assert abs(np.linalg.norm(recs[0].q) - 1.0) < 1e-15
    assert any("norm" in m for m in caplog.messages)


def test_tracks_zero_feature_frame(tmp_path):
    path = tmp_path / "tracks.csv"
    dataio.write_tracks(path, [FrameObservations(1000, 0, [])])
    frames = list(dataio.read_tracks(path))
    assert len(frames) == 1
    assert frames[0].observations == []


def test_tracks_duplicate_feature_rejected(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text("1000,0,3,0.1,0.2,3,0.3,0.4\n")
    with pytest.raises(dataio.DataFormatError):
        list(dataio.read_tracks(path))


@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_tracks_round_trip_fuzz(tmp_path_factory, data):
    n_frames = data.draw(st.integers(1, 6))
    frames = []
    t = 0
    for k in range(n_frames):
        t += data.draw(st.integers(1, 10 ** 12))
        n_obs = data.draw(st.integers(0, 8))
        fids = data.draw(st.lists(st.integers(0, 10 ** 6), min_size=n_obs,
                                  max_size=n_obs, unique=True))
        obs = []
        for fid in fids:
            coords = data.draw(st.tuples(
                st.floats(-2, 2, allow_nan=False, allow_infinity=False),
                st.floats(-2, 2, allow_nan=False, allow_infinity=False)))
            obs.append((fid, np.array(coords)))
        frames.append(FrameObservations(t, k, obs))
    path = tmp_path_factory.mktemp("fuzz") / "tracks.csv"
    dataio.write_tracks(path, frames)
    back = list(dataio.read_tracks(path))
    assert len(back) == len(frames)
    for a, b in zip(frames, back):
        assert a.timestamp_ns == b.timestamp_ns
        assert a.frame_id == b.frame_id
        assert len(a.observations) == len(b.observations)
        for (fa, za), (fb, zb) in zip(a.observations, b.observations):
            assert fa == fb
            assert np.array_equal(za, zb)


def test_estimates_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    records = [dataio.EstimateRecord(
        timestamp_ns=int(1e9 + i), p=rng.standard_normal(3),
        q=rng.standard_normal(4), v=rng.standard_normal(3),
        bg=rng.standard_normal(3), ba=rng.standard_normal(3),
        error_dim=15 + 6 * i, frame_time_us=float(rng.uniform(10, 100)))
        for i in range(5)]
    path = tmp_path / "est.csv"
    dataio.write_estimates(path, records)
    back = list(dataio.read_estimates(path))
    for a, b in zip(records, back):
        assert a.timestamp_ns == b.timestamp_ns
        assert np.array_equal(a.p, b.p)
        assert np.array_equal(a.q, b.q)
        assert a.error_dim == b.error_dim
        assert a.frame_time_us == b.frame_time_us


def test_estimates_empty_run_valid(tmp_path):
    path = tmp_path / "est.csv"
    dataio.write_estimates(path, [])
    assert list(dataio.read_estimates(path)) == []
    assert path.read_text().startswith("timestamp_ns,")


def test_summary_schema_and_round_trip(tmp_path):
    metrics = {
        "final_point_error_pct": 0.3141592653589793,
        "rmse_pos_m": 0.025,
        "rmse_att_deg": 1.25,
        "mean_frame_time_us": 812.5,
        "update_events": 412,
        "extraction_events": 37,
        "mode": "fmsckf",
    }
    path = tmp_path / "summary.txt"
    dataio.write_summary(path, metrics)
    back = dataio.read_summary(path)
    for key in ("final_point_error_pct", "rmse_pos_m", "rmse_att_deg",
                "mean_frame_time_us", "update_events", "extraction_events"):
        assert key in back
    assert back["final_point_error_pct"] == metrics["final_point_error_pct"]
    assert back["update_events"] == 412
    assert back["mode"] == "fmsckf"


def test_path_length():
    pts = np.array([[0.0, 0, 0], [3.0, 4.0, 0], [3.0, 4.0, 12.0]])
    assert dataio.path_length_of(pts) == pytest.approx(17.0)
    assert dataio.path_length_of(pts[:1]) == 0.0
