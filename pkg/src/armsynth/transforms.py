"""Rigid transforms on SE(3) backed by scalar-first unit quaternions.

Conventions used throughout the package:

- quaternions are stored ``(w, x, y, z)``,
- a transform ``T = (q, t)`` maps a point ``p`` expressed in the child
  frame to the parent frame via ``T(p) = R(q) @ p + t``,
- ``a.compose(b)`` is the transform that first applies ``b``, then ``a``
  (matrix product ``A @ B``).

Translations are meters, angles radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

# Inputs farther than this from unit norm are rejected instead of silently
# rescaled; inputs within _RENORM_TOL keep their exact bits so that
# save -> load round-trips are bitwise stable.
_UNIT_TOL = 1e-6
_RENORM_TOL = 1e-12


def _as_vec(value, size: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ParseError(f"{name} must have {size} components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns a unit quaternion with w >= 0."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Quaternion for a rotation of ``angle`` radians about a unit ``axis``."""
    half = 0.5 * angle
    s = math.sin(half)
    ax = np.asarray(axis, dtype=float)
    return np.array([math.cos(half), s * ax[0], s * ax[1], s * ax[2]])


def quat_geodesic_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle of the relative rotation between two unit quaternions, in [0, pi]."""
    rel = quat_multiply(quat_conjugate(a), b)
    s = math.sqrt(rel[1] ** 2 + rel[2] ** 2 + rel[3] ** 2)
    return 2.0 * math.atan2(s, abs(rel[0]))


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion, angle in [0, pi]."""
    w = q[0]
    v = np.array([q[1], q[2], q[3]])
    if w < 0:  # keep the short way around
        w, v = -w, -v
    s = math.sqrt(float(v @ v))
    if s < 1e-12:
        return 2.0 * v  # first-order: angle ~ 2s, axis ~ v/s
    angle = 2.0 * math.atan2(s, w)
    return (angle / s) * v


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_left_jacobian_inverse(omega: np.ndarray) -> np.ndarray:
    """Inverse left Jacobian of SO(3) at rotation vector ``omega``.

    Maps a left (world-frame) angular perturbation of the rotation to the
    change of its rotation vector. Series expansion below 1e-6 rad.
    """
    theta = float(np.linalg.norm(omega))
    wx = skew(omega)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * wx + (1.0 / 12.0) * (wx @ wx)
    coeff = 1.0 / theta**2 - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    return np.eye(3) - 0.5 * wx + coeff * (wx @ wx)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Immutable SE(3) element: unit quaternion ``rotation`` plus ``translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __init__(self, rotation=(1.0, 0.0, 0.0, 0.0), translation=(0.0, 0.0, 0.0)):
        q = _as_vec(rotation, 4, "rotation")
        t = _as_vec(translation, 3, "translation")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ParseError(f"non-unit quaternion (norm {norm:.6g})")
        if abs(norm - 1.0) > _RENORM_TOL:
            q = q / norm
            q.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, xyz) -> "RigidTransform":
        return cls(translation=xyz)

    @classmethod
    def rotation_about(cls, axis, angle: float, origin=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Rotation of ``angle`` about a unit ``axis`` through ``origin``."""
        q = quat_from_axis_angle(np.asarray(axis, dtype=float), angle)
        o = np.asarray(origin, dtype=float)
        t = o - quat_to_matrix(q) @ o
        return cls(rotation=q, translation=t)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return cls(rotation=quat_from_matrix(m[:3, :3]), translation=m[:3, 3])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation_matrix()
        out[:3, 3] = self.translation
        return out

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        q = quat_multiply(self.rotation, other.rotation)
        t = self.rotation_matrix() @ other.translation + self.translation
        return RigidTransform(rotation=q, translation=t)

    def inverse(self) -> "RigidTransform":
        q_inv = quat_conjugate(self.rotation)
        t_inv = -(quat_to_matrix(q_inv) @ self.translation)
        return RigidTransform(rotation=q_inv, translation=t_inv)

    def apply(self, point) -> np.ndarray:
        return self.rotation_matrix() @ np.asarray(point, dtype=float) + self.translation

    def rotate(self, vector) -> np.ndarray:
        return self.rotation_matrix() @ np.asarray(vector, dtype=float)

    def is_close(self, other: "RigidTransform", tol: float = 1e-12) -> bool:
        same_q = np.allclose(self.rotation, other.rotation, atol=tol) or np.allclose(
            self.rotation, -other.rotation, atol=tol
        )
        return same_q and np.allclose(self.translation, other.translation, atol=tol)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __repr__(self) -> str:
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "RigidTransform":
        if not isinstance(doc, dict):
            raise ParseError(f"transform must be an object, got {type(doc).__name__}")
        return cls(
            rotation=doc.get("rotation", (1.0, 0.0, 0.0, 0.0)),
            translation=doc.get("translation", (0.0, 0.0, 0.0)),
        )


IDENTITY = RigidTransform.identity()
