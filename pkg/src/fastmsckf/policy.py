"""Feature-management and state-pruning policies.

Two policies share one decision routine:

* ``msckf`` (conventional): features are extracted from every frame. Tracks
  that disappear from the current frame trigger an update; clones whose
  observations are fully consumed are pruned. When the clone count reaches
  its maximum, a third of the window is removed after consuming every track
  that touches the victims.

* ``fmsckf`` (keyframe): features are extracted only at keyframes. When the
  number of still-tracked features falls below ``n_feat_min``, every active
  track is consumed in one update, all clones except the newest are pruned,
  and the surviving frame becomes the next keyframe. Lost tracks between
  keyframes are consumed as in the conventional policy but without
  re-extraction, which is what removes the per-frame detection cost.

Decisions are total and deterministic: identical streams and configuration
produce identical decision sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .state import CLONE_DIM, FilterState
from .triangulate import FeatureTrack


class Trigger(Enum):
    NONE = "none"
    FEATURE_LOST = "feature_lost"
    MIN_FEATURES = "min_features"
    POSE_LIMIT = "pose_limit"


MODE_MSCKF = "msckf"
MODE_FMSCKF = "fmsckf"


@dataclass
class PolicyConfig:
    mode: str = MODE_FMSCKF
    n_pose_max: int = 20
    n_feat_min: int = 8
    max_corners: int = 350
    gate_confidence: float = 0.95

    def __post_init__(self):
        if self.mode not in (MODE_MSCKF, MODE_FMSCKF):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n_pose_max < 3:
            raise ValueError("n_pose_max must be >= 3")
        if not (1 <= self.n_feat_min < self.max_corners):
            raise ValueError("need 1 <= n_feat_min < max_corners")
        if not (0 < self.gate_confidence < 1):
            raise ValueError("gate_confidence must be in (0, 1)")


@dataclass
class UpdateDecision:
    trigger: Trigger
    tracks_to_use: list[FeatureTrack]
    clones_to_prune: list[int]  # frame ids
    request_extraction: bool


@dataclass
class TrackerLedger:
    """Active feature tracks plus the event counters the evaluation exports."""

    active: dict[int, FeatureTrack] = field(default_factory=dict)
    extraction_events: int = 0
    update_events: int = 0
    prune_events: int = 0
    tracks_started: int = 0
    admitted_ids: set[int] = field(default_factory=set)
    frame_live_counts: list[tuple[int, int]] = field(default_factory=list)

    def record_tracked(self, frame_id: int, observations) -> list[int]:
        """Append this frame's measurements of already-admitted features.

        Returns the ids observed this frame; unknown ids are left for
        admission (they only become tracks when extraction is requested).
        """
        live = []
        for fid, z in observations:
            track = self.active.get(fid)
            if track is not None:
                track.add(frame_id, z)
                live.append(fid)
        self.frame_live_counts.append((frame_id, len(live)))
        return live

    def admit(self, frame_id: int, observations, max_corners: int) -> list[int]:
        """Start new tracks for unknown ids, capped at max_corners live."""
        budget = max_corners - len(self.active)
        admitted = []
        for fid, z in observations:
            if budget <= 0:
                break
            if fid in self.active:
                continue
            track = FeatureTrack(fid)
            track.add(frame_id, z)
            self.active[fid] = track
            admitted.append(fid)
            budget -= 1
        self.tracks_started += len(admitted)
        self.admitted_ids.update(admitted)
        return admitted

    def consume(self, feature_ids) -> None:
        for fid in feature_ids:
            del self.active[fid]


def select_prune_set_poselimit(clone_frame_ids: list[int], k: int) -> list[int]:
    """Pick k victims evenly spaced over the window, never the newest clone."""
    candidates = clone_frame_ids[:-1]
    m = len(candidates)
    if k > m:
        raise ValueError(f"cannot prune {k} of {m} candidates")
    if k == 0:
        return []
    ranks = [(i * m) // k for i in range(k)]
    return [candidates[r] for r in ranks]


def prune_clones(state: FilterState, frame_ids) -> FilterState:
    """Marginalize clones out of the state: delete their rows and columns.

    Surviving covariance entries are untouched; dropping rows/columns of a
    jointly Gaussian density is exact marginalization.
    """
    frame_ids = list(frame_ids)
    if not frame_ids:
        return state
    indices = [state.clone_index(fid) for fid in frame_ids]
    keep = np.ones(state.error_dim(), dtype=bool)
    for idx in indices:
        off = state.clone_offset(idx)
        keep[off:off + CLONE_DIM] = False
    state.P = state.P[np.ix_(keep, keep)]
    doomed = set(frame_ids)
    state.clones = [c for c in state.clones if c.frame_id not in doomed]
    return state


def on_frame(ledger: TrackerLedger, live_ids, state: FilterState,
             cfg: PolicyConfig) -> UpdateDecision:
    """Decide the update batch, prune set and extraction request for a frame.

    Precondition: the frame is already augmented as the newest clone and the
    ledger holds this frame's measurements of tracked features. At most one
    update batch and one prune pass result; when several conditions hold in
    the same frame their batches are folded together so no track is consumed
    twice.
    """
    live = set(live_ids)
    lost = [fid for fid in ledger.active if fid not in live]
    clone_ids = [c.frame_id for c in state.clones]
    newest = clone_ids[-1] if clone_ids else None

    batch: list[int] = []
    prune: list[int] = []
    trigger = Trigger.NONE
    extract = cfg.mode == MODE_MSCKF

    if cfg.mode == MODE_FMSCKF and ledger.active and len(live) < cfg.n_feat_min:
        # keyframe event: spend every active track, keep only the newest pose
        trigger = Trigger.MIN_FEATURES
        batch = sorted(ledger.active)
        prune = [cid for cid in clone_ids if cid != newest]
        extract = True
    else:
        if lost:
            trigger = Trigger.FEATURE_LOST
            batch = sorted(lost)
        if cfg.mode == MODE_FMSCKF and not ledger.active:
            extract = True  # nothing tracked at all: bootstrap a keyframe

        consumed = set(batch)
        referenced: set[int] = set()
        for fid, track in ledger.active.items():
            if fid in consumed:
                continue
            referenced.update(track.frame_ids())
        prune = [cid for cid in clone_ids
                 if cid != newest and cid not in referenced]

        if len(clone_ids) - len(prune) >= cfg.n_pose_max:
            survivors = [cid for cid in clone_ids if cid not in set(prune)]
            k = cfg.n_pose_max // 3
            victims = select_prune_set_poselimit(survivors, k)
            victim_set = set(victims)
            extras = []
            for fid, track in ledger.active.items():
                if fid in consumed:
                    continue
                if victim_set.intersection(track.frame_ids()):
                    extras.append(fid)
                    consumed.add(fid)
            batch.extend(sorted(extras))
            prune.extend(victims)
            trigger = Trigger.POSE_LIMIT

    tracks = [ledger.active[fid] for fid in batch]
    return UpdateDecision(trigger=trigger, tracks_to_use=tracks,
                          clones_to_prune=prune, request_extraction=extract)
