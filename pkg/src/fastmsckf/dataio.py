"""File formats: EuRoC-style IMU and ground-truth CSVs, the track file that
replaces an image front-end, estimate logs, and key-value summaries.

All readers are streaming generators, timestamps are integer nanoseconds
end to end, and floats are written with ``repr`` so write/read round-trips
are exact. Simulator-written files and hand-written EuRoC files are
indistinguishable to the pipeline.

Ground-truth files store the attitude as a scalar-first world<-body
quaternion (the EuRoC layout); readers convert to the package's scalar-last
global->body convention, which amounts to moving the scalar to the back.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .propagation import ImuSample
from .sim import FrameObservations

logger = logging.getLogger(__name__)

IMU_HEADER = ("#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],"
              "w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],"
              "a_RS_S_z [m s^-2]")
GT_HEADER = ("#timestamp, p_RS_R_x [m], p_RS_R_y [m], p_RS_R_z [m], "
             "q_RS_w [], q_RS_x [], q_RS_y [], q_RS_z [], "
             "v_RS_R_x [m s^-1], v_RS_R_y [m s^-1], v_RS_R_z [m s^-1], "
             "b_w_RS_S_x [rad s^-1], b_w_RS_S_y [rad s^-1], b_w_RS_S_z [rad s^-1], "
             "b_a_RS_S_x [m s^-2], b_a_RS_S_y [m s^-2], b_a_RS_S_z [m s^-2]")
ESTIMATE_HEADER = ("timestamp_ns,p_x,p_y,p_z,q_x,q_y,q_z,q_w,v_x,v_y,v_z,"
                   "bg_x,bg_y,bg_z,ba_x,ba_y,ba_z,error_dim,frame_time_us")


class DataFormatError(ValueError):
    """Malformed input file; carries the offending line number."""


@dataclass
class GroundTruthRecord:
    timestamp_ns: int
    p: np.ndarray
    q: np.ndarray  # scalar-last, global -> body
    v: np.ndarray


@dataclass
class EstimateRecord:
    timestamp_ns: int
    p: np.ndarray
    q: np.ndarray
    v: np.ndarray
    bg: np.ndarray
    ba: np.ndarray
    error_dim: int
    frame_time_us: float


def _data_lines(path) -> Iterator[tuple[int, str]]:
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def _parse_floats(parts, lineno, path):
    try:
        return [float(x) for x in parts]
    except ValueError as exc:
        raise DataFormatError(f"{path}:{lineno}: {exc}") from None


def read_imu(path) -> Iterator[ImuSample]:
    """Stream an IMU CSV (7 columns); header lines are tolerated."""
    prev_t = None
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 7:
            raise DataFormatError(
                f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        try:
            t = int(parts[0])
        except ValueError:
            raise DataFormatError(
                f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
        if prev_t is not None and t <= prev_t:
            raise DataFormatError(
                f"{path}:{lineno}: non-monotone timestamp {t}")
        prev_t = t
        vals = _parse_floats(parts[1:], lineno, path)
        yield ImuSample(t, np.array(vals[0:3]), np.array(vals[3:6]))


def write_imu(path, samples: Iterable[ImuSample]) -> None:
    with open(path, "w") as fh:
        fh.write(IMU_HEADER + "\n")
        for s in samples:
            fields = [str(s.timestamp_ns)] + [repr(float(x)) for x in s.w] \
                + [repr(float(x)) for x in s.a]
            fh.write(",".join(fields) + "\n")


def read_groundtruth(path) -> Iterator[GroundTruthRecord]:
    """Stream a ground-truth CSV (timestamp, position, quaternion, velocity,
    optionally biases). Quaternions are renormalized on load."""
    prev_t = None
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) < 11:
            raise DataFormatError(
                f"{path}:{lineno}: expected >= 11 fields, got {len(parts)}")
        try:
            t = int(parts[0])
        except ValueError:
            raise DataFormatError(
                f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
        if prev_t is not None and t <= prev_t:
            raise DataFormatError(
                f"{path}:{lineno}: non-monotone timestamp {t}")
        prev_t = t
        vals = _parse_floats(parts[1:11], lineno, path)
        p = np.array(vals[0:3])
        qw, qx, qy, qz = vals[3:7]
        v = np.array(vals[7:10])
        q = np.array([qx, qy, qz, qw])  # scalar-first world<-body -> ours
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-3:
            logger.warning("%s:%d: quaternion norm %.6f off unit", path,
                           lineno, norm)
        if norm == 0:
            raise DataFormatError(f"{path}:{lineno}: zero quaternion")
        yield GroundTruthRecord(t, p, q / norm, v)


def write_groundtruth(path, records: Iterable) -> None:
    """Write (t_ns, p, q, v[, bg, ba]) tuples in the EuRoC-style layout."""
    with open(path, "w") as fh:
        fh.write(GT_HEADER + "\n")
        for rec in records:
            t, p, q, v = rec[0], rec[1], rec[2], rec[3]
            bg = rec[4] if len(rec) > 4 else np.zeros(3)
            ba = rec[5] if len(rec) > 5 else np.zeros(3)
            quat = [q[3], q[0], q[1], q[2]]  # ours -> scalar-first
            fields = [str(int(t))] + [repr(float(x)) for x in
                                      (*p, *quat, *v, *bg, *ba)]
            fh.write(",".join(fields) + "\n")


def read_tracks(path) -> Iterator[FrameObservations]:
    """Stream a track file: one frame per line,
    ``timestamp_ns,frame_id[,feature_id,u,v]*``."""
    prev_frame = None
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) < 2 or (len(parts) - 2) % 3 != 0:
            raise DataFormatError(
                f"{path}:{lineno}: malformed frame line ({len(parts)} fields)")
        try:
            t = int(parts[0])
            frame_id = int(parts[1])
        except ValueError:
            raise DataFormatError(
                f"{path}:{lineno}: bad frame header") from None
        if prev_frame is not None and frame_id <= prev_frame:
            raise DataFormatError(
                f"{path}:{lineno}: non-increasing frame_id {frame_id}")
        prev_frame = frame_id
        obs = []
        seen = set()
        for k in range(2, len(parts), 3):
            try:
                fid = int(parts[k])
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: bad feature id {parts[k]!r}") from None
            if fid in seen:
                raise DataFormatError(
                    f"{path}:{lineno}: duplicate feature id {fid}")
            seen.add(fid)
            u, v = _parse_floats(parts[k + 1:k + 3], lineno, path)
            obs.append((fid, np.array([u, v])))
        yield FrameObservations(t, frame_id, obs)


def write_tracks(path, frames: Iterable[FrameObservations]) -> None:
    with open(path, "w") as fh:
        fh.write("#timestamp_ns,frame_id[,feature_id,u,v]*\n")
        for fr in frames:
            fields = [str(fr.timestamp_ns), str(fr.frame_id)]
            for fid, z in fr.observations:
                fields += [str(int(fid)), repr(float(z[0])), repr(float(z[1]))]
            fh.write(",".join(fields) + "\n")


def write_estimates(path, records: Iterable[EstimateRecord]) -> None:
    with open(path, "w") as fh:
        fh.write(ESTIMATE_HEADER + "\n")
        for r in records:
            fields = [str(r.timestamp_ns)] \
                + [repr(float(x)) for x in (*r.p, *r.q, *r.v, *r.bg, *r.ba)] \
                + [str(int(r.error_dim)), repr(float(r.frame_time_us))]
            fh.write(",".join(fields) + "\n")


def read_estimates(path) -> Iterator[EstimateRecord]:
    for lineno, line in _data_lines(path):
        if line.startswith("timestamp"):
            continue
        parts = line.split(",")
        if len(parts) != 19:
            raise DataFormatError(
                f"{path}:{lineno}: expected 19 fields, got {len(parts)}")
        t = int(parts[0])
        vals = _parse_floats(parts[1:17], lineno, path)
        yield EstimateRecord(
            t, np.array(vals[0:3]), np.array(vals[3:7]), np.array(vals[7:10]),
            np.array(vals[10:13]), np.array(vals[13:16]),
            int(parts[17]), float(parts[18]))


def write_summary(path, metrics: dict) -> None:
    """Key-value document; floats keep full precision."""
    with open(path, "w") as fh:
        for key, value in metrics.items():
            if isinstance(value, float):
                fh.write(f"{key} = {repr(value)}\n")
            else:
                fh.write(f"{key} = {value}\n")


def read_summary(path) -> dict:
    out: dict = {}
    for lineno, line in _data_lines(path):
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            num = float(value)
            out[key] = int(num) if num.is_integer() and "." not in value \
                and "e" not in value.lower() else num
        except ValueError:
            out[key] = value
    return out


def write_table(path, header: list[str], rows: Iterable) -> None:
    """Plot-ready delimited table for the figure analogs."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                repr(float(x)) if isinstance(x, (float, np.floating))
                else str(x) for x in row) + "\n")


def path_length_of(positions: np.ndarray) -> float:
    """Integrated arc length of a position series."""
    if len(positions) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(positions, axis=0), axis=1)))
