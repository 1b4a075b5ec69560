"""Filter state container: IMU block, camera clones, error-state covariance.

The error-state vector is ordered
``[dtheta, dbg, dv, dba, dp, then per clone (dtheta_c, dp_c)]``
so the covariance always has dimension ``15 + 6 * len(clones)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quat import error_quat, quat_identity, quat_multiply, quat_normalize

ATT = slice(0, 3)
BG = slice(3, 6)
VEL = slice(6, 9)
BA = slice(9, 12)
POS = slice(12, 15)

IMU_DIM = 15
CLONE_DIM = 6

DEFAULT_GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass
class ImuState:
    """Nominal IMU state: attitude (global->body), biases, velocity, position."""

    q: np.ndarray = field(default_factory=quat_identity)
    bg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ba: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "ImuState":
        return ImuState(self.q.copy(), self.bg.copy(), self.v.copy(),
                        self.ba.copy(), self.p.copy())


@dataclass
class CameraClone:
    """One stored camera pose (attitude global->camera, position in global)."""

    q: np.ndarray
    p: np.ndarray
    frame_id: int
    timestamp_ns: int

    def copy(self) -> "CameraClone":
        return CameraClone(self.q.copy(), self.p.copy(), self.frame_id,
                           self.timestamp_ns)


@dataclass
class InitialConditions:
    """Initial nominal state and the stds of the initial diagonal covariance."""

    q: np.ndarray = field(default_factory=quat_identity)
    bg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ba: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sigma_att: float = 1e-2
    sigma_bg: float = 1e-3
    sigma_v: float = 0.0
    sigma_ba: float = 1e-2
    sigma_p: float = 0.0


class FilterState:
    """Nominal state plus error-state covariance.

    Owned by a single pipeline; operations take exclusive access and mutate
    in place. Use :meth:`copy` to snapshot.
    """

    def __init__(self, imu: ImuState, P: np.ndarray, gravity=DEFAULT_GRAVITY):
        self.imu = imu
        self.clones: list[CameraClone] = []
        self.P = np.asarray(P, dtype=float)
        self.gravity = np.asarray(gravity, dtype=float)
        # largest asymmetry seen in any covariance before hygiene enforced it
        self.pre_symmetry_gap = 0.0

    def error_dim(self) -> int:
        return IMU_DIM + CLONE_DIM * len(self.clones)

    def clone_offset(self, index: int) -> int:
        """Start of clone ``index``'s error block within the error state."""
        return IMU_DIM + CLONE_DIM * index

    def clone_index(self, frame_id: int) -> int:
        for i, c in enumerate(self.clones):
            if c.frame_id == frame_id:
                return i
        raise KeyError(f"no clone for frame {frame_id}")

    def copy(self) -> "FilterState":
        out = FilterState(self.imu.copy(), self.P.copy(), self.gravity.copy())
        out.clones = [c.copy() for c in self.clones]
        out.pre_symmetry_gap = self.pre_symmetry_gap
        return out

    def note_asymmetry(self, M: np.ndarray) -> None:
        gap = float(np.max(np.abs(M - M.T))) if M.size else 0.0
        if gap > self.pre_symmetry_gap:
            self.pre_symmetry_gap = gap


def new_filter_state(init: InitialConditions,
                     gravity=DEFAULT_GRAVITY) -> FilterState:
    """Fresh state with zero clones and a diagonal 15x15 covariance."""
    fields = np.concatenate([init.q, init.bg, init.v, init.ba, init.p])
    if not np.all(np.isfinite(fields)):
        raise ValueError("non-finite initial conditions")
    sigmas = [init.sigma_att, init.sigma_bg, init.sigma_v, init.sigma_ba,
              init.sigma_p]
    if any(s < 0 or not np.isfinite(s) for s in sigmas):
        raise ValueError("initial stds must be finite and >= 0")
    diag = np.repeat(np.square(sigmas), 3)
    imu = ImuState(quat_normalize(init.q), np.array(init.bg, dtype=float),
                   np.array(init.v, dtype=float), np.array(init.ba, dtype=float),
                   np.array(init.p, dtype=float))
    return FilterState(imu, np.diag(diag), gravity)


def symmetrize(P: np.ndarray) -> np.ndarray:
    """(P + P^T) / 2; numerical hygiene after covariance updates."""
    return 0.5 * (P + P.T)


def apply_correction(state: FilterState, dx: np.ndarray) -> FilterState:
    """Fold an error-state correction into the nominal state.

    Attitude entries compose through the small-angle quaternion; every other
    entry is plain addition. ``dx`` must match the current error dimension.
    """
    dx = np.asarray(dx, dtype=float)
    if dx.shape != (state.error_dim(),):
        raise ValueError(
            f"correction length {dx.shape} != error dim {state.error_dim()}")
    imu = state.imu
    imu.q = quat_multiply(error_quat(dx[ATT]), imu.q)
    imu.bg = imu.bg + dx[BG]
    imu.v = imu.v + dx[VEL]
    imu.ba = imu.ba + dx[BA]
    imu.p = imu.p + dx[POS]
    for i, clone in enumerate(state.clones):
        off = state.clone_offset(i)
        clone.q = quat_multiply(error_quat(dx[off:off + 3]), clone.q)
        clone.p = clone.p + dx[off + 3:off + 6]
    return state
