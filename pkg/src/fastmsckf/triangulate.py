"""Feature triangulation from a track across stored camera clones.

A two-view midpoint solve seeds a Gauss-Newton refinement over all
observations. The refinement is parameterized in inverse depth anchored at
the first observing camera, which keeps distant features well conditioned.
A step-halving line search keeps the reprojection cost non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quat import quat_to_rot
from .state import CameraClone

MIN_TRACK_OBS = 3  # shorter tracks carry too little constraint post-projection
MIN_BASELINE_DEPTH_RATIO = 0.02


class NotTriangulatable(ValueError):
    """Geometry too degenerate to even initialize (e.g. zero baseline)."""


@dataclass
class FeatureTrack:
    """Ordered per-frame normalized observations of one feature."""

    feature_id: int
    observations: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def add(self, frame_id: int, z) -> None:
        if self.observations and frame_id <= self.observations[-1][0]:
            raise ValueError("frame ids within a track must increase")
        self.observations.append((frame_id, np.asarray(z, dtype=float)))

    def frame_ids(self) -> list[int]:
        return [fid for fid, _ in self.observations]

    def __len__(self) -> int:
        return len(self.observations)


@dataclass
class TriangulationResult:
    p_global: np.ndarray
    converged: bool
    rms_reprojection: float
    iterations: int


def _ray(clone: CameraClone, z) -> np.ndarray:
    """Unit-free viewing ray of a normalized observation, in the global frame."""
    d = np.array([z[0], z[1], 1.0])
    return quat_to_rot(clone.q).T @ d


def linear_init(track: FeatureTrack, clones: dict[int, CameraClone]) -> np.ndarray:
    """Midpoint of the first and last viewing rays.

    Raises NotTriangulatable when the two-view system is rank deficient
    (identical camera centers or parallel rays). A point behind the cameras
    is returned as-is; the refinement's depth check rejects it later.
    """
    if len(track) < 2:
        raise NotTriangulatable("need at least two observations")
    (f0, z0), (f1, z1) = track.observations[0], track.observations[-1]
    c0, c1 = clones[f0], clones[f1]
    d0, d1 = _ray(c0, z0), _ray(c1, z1)
    b = c1.p - c0.p

    # closest point between the two rays: solve for the ray parameters
    A = np.array([[d0 @ d0, -d0 @ d1],
                  [d0 @ d1, -d1 @ d1]])
    rhs = np.array([d0 @ b, d1 @ b])
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) < 1e-12 * max(1.0, float(d0 @ d0) * float(d1 @ d1)):
        raise NotTriangulatable("zero baseline or parallel rays")
    t = np.linalg.solve(A, rhs)
    near0 = c0.p + t[0] * d0
    near1 = c1.p + t[1] * d1
    return 0.5 * (near0 + near1)


def _stack_views(track: FeatureTrack, clones: dict[int, CameraClone]):
    """Per-view rotation/translation relative to the anchor (first) camera,
    stacked for batch evaluation."""
    anchor = clones[track.observations[0][0]]
    R0 = quat_to_rot(anchor.q)
    n = len(track.observations)
    R_rel = np.empty((n, 3, 3))
    t_rel = np.empty((n, 3))
    z_all = np.empty((n, 2))
    for i, (fid, z) in enumerate(track.observations):
        ci = clones[fid]
        Ri = quat_to_rot(ci.q)
        R_rel[i] = Ri @ R0.T
        t_rel[i] = Ri @ (anchor.p - ci.p)
        z_all[i] = z
    return anchor, R0, (R_rel, t_rel, z_all)


def _residuals(theta, rel):
    """Residuals, Jacobian and per-view projective scale for parameters
    theta = (x/z, y/z, 1/z) in the anchor camera."""
    R_rel, t_rel, z_all = rel
    a, b, rho = theta
    m = np.array([a, b, 1.0])
    v = R_rel @ m + rho * t_rel
    scales = v[:, 2].copy()
    v3 = np.where(np.abs(v[:, 2]) < 1e-12,
                  np.where(v[:, 2] >= 0, 1e-12, -1e-12), v[:, 2])
    u0 = v[:, 0] / v3
    u1 = v[:, 1] / v3
    r = (z_all - np.column_stack([u0, u1])).ravel()

    n = len(v3)
    J = np.empty((n, 2, 3))
    for c, d in ((0, R_rel[:, :, 0]), (1, R_rel[:, :, 1]), (2, t_rel)):
        J[:, 0, c] = (d[:, 0] - u0 * d[:, 2]) / v3
        J[:, 1, c] = (d[:, 1] - u1 * d[:, 2]) / v3
    return r, J.reshape(2 * n, 3), scales


def refine(track: FeatureTrack, clones: dict[int, CameraClone],
           init: np.ndarray, *, max_iters: int = 10, step_tol: float = 1e-8,
           rms_reject: float | None = None,
           min_baseline_depth_ratio: float = MIN_BASELINE_DEPTH_RATIO
           ) -> TriangulationResult:
    """Gauss-Newton refinement of a feature position over all observations."""
    anchor, R0, rel = _stack_views(track, clones)

    p_anchor = R0 @ (np.asarray(init, dtype=float) - anchor.p)
    z0 = p_anchor[2]
    if abs(z0) < 1e-9:
        z0 = 1e-9
    theta = np.array([p_anchor[0] / z0, p_anchor[1] / z0, 1.0 / z0])

    r, J, scales = _residuals(theta, rel)
    cost = float(r @ r)
    iterations = 0
    converged = False
    stalled = 0
    for _ in range(max_iters):
        iterations += 1
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        if float(np.linalg.norm(step)) < step_tol:
            converged = True  # fixed point; nothing to move
            break
        accepted = False
        scale = 1.0
        for _ in range(6):  # full step plus up to 5 halvings
            cand = theta + scale * step
            r_c, J_c, s_c = _residuals(cand, rel)
            cost_c = float(r_c @ r_c)
            if cost_c <= cost:
                theta, r, J, scales, cost = cand, r_c, J_c, s_c, cost_c
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # every trial raised the cost: either we sit at the noise-floor
            # optimum (tiny step, fine) or the iteration cannot make progress
            if float(np.linalg.norm(step)) < 1e-4:
                converged = True
                break
            stalled += 1
            if stalled >= 3:
                break
            continue
        stalled = 0
        if float(np.linalg.norm(scale * step)) < step_tol:
            converged = True
            break
    else:
        converged = True  # iteration budget spent; final checks decide

    if stalled >= 3:
        converged = False

    rho = theta[2]
    if rho == 0.0:
        return TriangulationResult(np.full(3, np.nan), False, np.inf, iterations)
    p_anchor = np.array([theta[0], theta[1], 1.0]) / rho
    p_global = R0.T @ p_anchor + anchor.p

    rms = float(np.sqrt(cost / len(r)))
    depths = scales / rho
    if np.any(depths <= 0):
        converged = False
    if rms_reject is not None and rms > rms_reject:
        converged = False
    baseline = max(float(np.linalg.norm(clones[fid].p - anchor.p))
                   for fid, _ in track.observations)
    depth = float(np.linalg.norm(p_global - anchor.p))
    if depth > 0 and baseline / depth < min_baseline_depth_ratio:
        converged = False

    return TriangulationResult(p_global, converged, rms, iterations)


def triangulate(track: FeatureTrack, clones: dict[int, CameraClone],
                sigma_im: float) -> TriangulationResult:
    """Initialize and refine; a failed result must drop the feature."""
    if len(track) < MIN_TRACK_OBS:
        return TriangulationResult(np.full(3, np.nan), False, np.inf, 0)
    try:
        init = linear_init(track, clones)
    except NotTriangulatable:
        return TriangulationResult(np.full(3, np.nan), False, np.inf, 0)
    return refine(track, clones, init, rms_reject=3.0 * sigma_im)
