"""Quaternion and SO(3) primitives.

Conventions used throughout the package:

* Quaternions are numpy arrays ``[x, y, z, w]`` (scalar last) and represent
  frame rotations global -> local, so ``quat_to_rot(q)`` maps a vector
  expressed in the global frame into the local frame.
* Composition is chosen so that ``quat_to_rot(quat_multiply(a, b))``
  equals ``quat_to_rot(a) @ quat_to_rot(b)``; chained frame rotations
  therefore read left to right the way rotation matrices do.
* The attitude error vector ``dtheta`` is defined through the left
  correction ``q = error_quat(dtheta) * q_hat``, equivalent to
  ``R = (I - skew(dtheta)) @ R_hat`` to first order.

All functions are pure and operate on plain arrays; they are safe to call
from any thread.
"""

from __future__ import annotations

import math

import numpy as np

QUAT_IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def omega_matrix(w) -> np.ndarray:
    """4x4 angular-rate matrix driving q_dot = 0.5 * omega_matrix(w) @ q."""
    out = np.zeros((4, 4))
    out[:3, :3] = -skew(w)
    out[:3, 3] = w
    out[3, :3] = -np.asarray(w, dtype=float)
    return out


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_identity() -> np.ndarray:
    return QUAT_IDENTITY.copy()


def quat_multiply(q1, q2) -> np.ndarray:
    """Compose two frame rotations; result is renormalized."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    v1, w1 = q1[:3], q1[3]
    v2, w2 = q2[:3], q2[3]
    v = w1 * v2 + w2 * v1 - np.cross(v1, v2)
    w = w1 * w2 - v1 @ v2
    return quat_normalize(np.array([v[0], v[1], v[2], w]))


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_to_rot(q) -> np.ndarray:
    """Rotation matrix (global -> local) of a unit quaternion.

    Expanded form of (w^2 - |v|^2) I + 2 v v^T - 2 w [v x].
    """
    x, y, z, w = (float(c) for c in q)
    xx, yy, zz, ww = x * x, y * y, z * z, w * w
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [ww + xx - yy - zz, 2.0 * (xy + wz), 2.0 * (xz - wy)],
        [2.0 * (xy - wz), ww - xx + yy - zz, 2.0 * (yz + wx)],
        [2.0 * (xz + wy), 2.0 * (yz - wx), ww - xx - yy + zz],
    ])


def rot_to_quat(R) -> np.ndarray:
    """Inverse of quat_to_rot, up to sign; returns the scalar >= 0 branch."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(1.0 + tr)
        w = 0.25 * s
        x = (R[1, 2] - R[2, 1]) / s
        y = (R[2, 0] - R[0, 2]) / s
        z = (R[0, 1] - R[1, 0]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        x = 0.25 * s
        w = (R[1, 2] - R[2, 1]) / s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        y = 0.25 * s
        w = (R[2, 0] - R[0, 2]) / s
        x = (R[0, 1] + R[1, 0]) / s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        z = 0.25 * s
        w = (R[0, 1] - R[1, 0]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
    q = quat_normalize(np.array([x, y, z, w]))
    if q[3] < 0.0:
        q = -q
    return q


def error_quat(dtheta) -> np.ndarray:
    """Small-angle quaternion with vector part dtheta/2 and unit norm."""
    half = 0.5 * np.asarray(dtheta, dtype=float)
    n2 = float(half @ half)
    if n2 <= 1.0:
        return np.array([half[0], half[1], half[2], math.sqrt(1.0 - n2)])
    # correction larger than the small-angle domain; fall back to projection
    return np.array([half[0], half[1], half[2], 1.0]) / math.sqrt(1.0 + n2)


def rotation_angle(q) -> float:
    """Total rotation angle of a unit quaternion, in radians, in [0, pi]."""
    q = np.asarray(q, dtype=float)
    return 2.0 * math.atan2(float(np.linalg.norm(q[:3])), abs(float(q[3])))


def quat_slerp(q0, q1, u: float) -> np.ndarray:
    """Shortest-path spherical interpolation, u in [0, 1]."""
    q0 = quat_normalize(q0)
    q1 = quat_normalize(q1)
    dot = float(q0 @ q1)
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(q0 + u * (q1 - q0))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return quat_normalize(
        (math.sin((1.0 - u) * theta) / s) * q0 + (math.sin(u * theta) / s) * q1
    )
