"""Replay engine: drives propagation, augmentation, the management policy
and the measurement update over a merged, timestamp-ordered stream.

The per-frame processing time recorded in the estimate log spans clone
augmentation through update and pruning, which is the algebraic share of the
frame cost; feature extraction is represented by the ledger's event counter
because detection itself happens outside this artifact's boundary.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .augment import Extrinsics, augment
from .dataio import EstimateRecord
from .policy import (PolicyConfig, TrackerLedger, UpdateDecision, on_frame,
                     prune_clones)
from .propagation import ImuSample, NoiseConfig, propagate
from .sim import FrameObservations
from .state import (DEFAULT_GRAVITY, FilterState, IMU_DIM, InitialConditions,
                    new_filter_state)
from .triangulate import MIN_TRACK_OBS, triangulate
from .update import (BehindCamera, DegenerateFeature, ekf_update,
                     mahalanobis_gate, nullspace_project, feature_jacobians,
                     stack_and_compress)

logger = logging.getLogger(__name__)


@dataclass
class HygieneReport:
    """Numerical-health extremes collected across a run (optional)."""

    max_asymmetry: float = 0.0
    min_eigenvalue: float = np.inf
    dim_consistent: bool = True
    max_clone_count: int = 0
    frames: int = 0


@dataclass
class RunResult:
    records: list[EstimateRecord]
    ledger: TrackerLedger
    state: FilterState
    hygiene: HygieneReport | None = None


@dataclass
class PipelineConfig:
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    extrinsics: Extrinsics = field(default_factory=Extrinsics)
    gravity: np.ndarray = field(default_factory=lambda: DEFAULT_GRAVITY.copy())
    init: InitialConditions = field(default_factory=InitialConditions)


class VioPipeline:
    """Single-owner filter pipeline; feed samples in timestamp order."""

    def __init__(self, cfg: PipelineConfig, collect_hygiene: bool = False):
        self.cfg = cfg
        self.state = new_filter_state(cfg.init, cfg.gravity)
        self.ledger = TrackerLedger()
        self.records: list[EstimateRecord] = []
        self._last_imu_ns: int | None = None
        self.hygiene = HygieneReport() if collect_hygiene else None

    def process_imu(self, sample: ImuSample) -> None:
        if self._last_imu_ns is None:
            self._last_imu_ns = sample.timestamp_ns
            return
        dt = (sample.timestamp_ns - self._last_imu_ns) * 1e-9
        self._last_imu_ns = sample.timestamp_ns
        propagate(self.state, sample, dt, self.cfg.noise)

    def _run_update(self, decision: UpdateDecision) -> None:
        sigma_im = self.cfg.noise.sigma_im
        clones = {c.frame_id: c for c in self.state.clones}
        blocks = []
        for track in sorted(decision.tracks_to_use, key=lambda t: t.feature_id):
            if len(track) < MIN_TRACK_OBS:
                continue
            tri = triangulate(track, clones, sigma_im)
            if not tri.converged:
                continue
            try:
                r_f, H_X, H_f = feature_jacobians(track, self.state,
                                                  tri.p_global)
                block = nullspace_project(r_f, H_X, H_f, sigma_im,
                                          track.feature_id)
            except (BehindCamera, DegenerateFeature):
                continue
            if mahalanobis_gate(block, self.state.P,
                                self.cfg.policy.gate_confidence):
                blocks.append(block)
        if not blocks:
            return
        upd = stack_and_compress(blocks, self.state.error_dim())
        ekf_update(self.state, upd)
        self.ledger.update_events += 1

    def process_frame(self, frame: FrameObservations) -> EstimateRecord:
        t0 = time.perf_counter_ns()
        augment(self.state, self.cfg.extrinsics, frame.frame_id,
                frame.timestamp_ns)
        live = self.ledger.record_tracked(frame.frame_id, frame.observations)
        decision = on_frame(self.ledger, live, self.state, self.cfg.policy)

        if decision.tracks_to_use:
            self._run_update(decision)
            self.ledger.consume([t.feature_id for t in decision.tracks_to_use])
        if decision.clones_to_prune:
            prune_clones(self.state, decision.clones_to_prune)
            self.ledger.prune_events += 1
        if decision.request_extraction:
            self.ledger.extraction_events += 1
            self.ledger.admit(frame.frame_id, frame.observations,
                              self.cfg.policy.max_corners)
        elapsed_us = (time.perf_counter_ns() - t0) * 1e-3

        imu = self.state.imu
        record = EstimateRecord(
            timestamp_ns=frame.timestamp_ns, p=imu.p.copy(), q=imu.q.copy(),
            v=imu.v.copy(), bg=imu.bg.copy(), ba=imu.ba.copy(),
            error_dim=self.state.error_dim(), frame_time_us=elapsed_us)
        self.records.append(record)
        if self.hygiene is not None:
            self._collect_hygiene()
        return record

    def _collect_hygiene(self) -> None:
        h = self.hygiene
        P = self.state.P
        h.frames += 1
        h.max_asymmetry = max(h.max_asymmetry, self.state.pre_symmetry_gap)
        h.min_eigenvalue = min(h.min_eigenvalue,
                               float(np.linalg.eigvalsh(P).min()))
        h.dim_consistent = h.dim_consistent and (
            P.shape[0] == IMU_DIM + 6 * len(self.state.clones)
            == self.state.error_dim())
        h.max_clone_count = max(h.max_clone_count, len(self.state.clones))

    def run(self, imu_stream, frame_stream) -> RunResult:
        """Replay merged streams; IMU samples at a frame time integrate first."""
        frames = iter(frame_stream)
        pending = next(frames, None)
        for sample in imu_stream:
            while pending is not None and \
                    pending.timestamp_ns < sample.timestamp_ns:
                self.process_frame(pending)
                pending = next(frames, None)
            self.process_imu(sample)
            while pending is not None and \
                    pending.timestamp_ns == sample.timestamp_ns:
                self.process_frame(pending)
                pending = next(frames, None)
        while pending is not None:
            self.process_frame(pending)
            pending = next(frames, None)
        return RunResult(self.records, self.ledger, self.state, self.hygiene)


def dead_reckon(imu_stream, init: InitialConditions,
                noise: NoiseConfig | None = None,
                gravity=DEFAULT_GRAVITY) -> list[EstimateRecord]:
    """Propagation-only replay; drifts by construction, useful as a baseline."""
    pipeline = VioPipeline(PipelineConfig(
        noise=noise or NoiseConfig(), init=init,
        gravity=np.asarray(gravity, dtype=float)))
    records = []
    for sample in imu_stream:
        pipeline.process_imu(sample)
        imu = pipeline.state.imu
        records.append(EstimateRecord(
            sample.timestamp_ns, imu.p.copy(), imu.q.copy(), imu.v.copy(),
            imu.bg.copy(), imu.ba.copy(), IMU_DIM, 0.0))
    return records
