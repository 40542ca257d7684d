"""Collision primitives and pairwise distance queries.

Distances are exact for every pair not involving a box, and exact for
box/sphere. Box/capsule and box/box fall back to sampled queries against the
box signed-distance field with a Lipschitz margin, so they may under-report
separation slightly but never report separation for an intersecting pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .transforms import RigidTransform, _as_vec

DEFAULT_CLEARANCE = 0.005  # meters
_CAPSULE_SAMPLES = 64
_EDGE_SAMPLES = 16


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __init__(self, center, radius: float):
        object.__setattr__(self, "center", _as_vec(center, 3, "center"))
        object.__setattr__(self, "radius", float(radius))
        if self.radius <= 0:
            raise ValidationError(f"sphere radius must be > 0, got {self.radius}")

    def to_dict(self) -> dict:
        return {"shape": "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Capsule:
    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    radius: float

    def __init__(self, endpoint_a, endpoint_b, radius: float):
        object.__setattr__(self, "endpoint_a", _as_vec(endpoint_a, 3, "endpoint_a"))
        object.__setattr__(self, "endpoint_b", _as_vec(endpoint_b, 3, "endpoint_b"))
        object.__setattr__(self, "radius", float(radius))
        if self.radius <= 0:
            raise ValidationError(f"capsule radius must be > 0, got {self.radius}")

    def to_dict(self) -> dict:
        return {
            "shape": "capsule",
            "endpoint_a": self.endpoint_a.tolist(),
            "endpoint_b": self.endpoint_b.tolist(),
            "radius": self.radius,
        }


@dataclass(frozen=True, eq=False)
class Box:
    center: np.ndarray
    half_extents: np.ndarray
    orientation: np.ndarray  # unit quaternion (w, x, y, z)

    def __init__(self, center, half_extents, orientation=(1.0, 0.0, 0.0, 0.0)):
        object.__setattr__(self, "center", _as_vec(center, 3, "center"))
        object.__setattr__(self, "half_extents", _as_vec(half_extents, 3, "half_extents"))
        frame = RigidTransform(rotation=orientation)  # validates unit norm
        object.__setattr__(self, "orientation", frame.rotation)
        if not np.all(self.half_extents > 0):
            raise ValidationError(f"box half_extents must be > 0, got {self.half_extents.tolist()}")

    def to_dict(self) -> dict:
        return {
            "shape": "box",
            "center": self.center.tolist(),
            "half_extents": self.half_extents.tolist(),
            "orientation": self.orientation.tolist(),
        }


CollisionPrimitive = Sphere | Capsule | Box


@dataclass(frozen=True, eq=False)
class Obstacle:
    id: str
    primitive: CollisionPrimitive

    def to_dict(self) -> dict:
        return {"id": self.id, "primitive": self.primitive.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Obstacle":
        if "id" not in doc or "primitive" not in doc:
            raise ParseError("obstacle requires 'id' and 'primitive' fields")
        return cls(id=str(doc["id"]), primitive=primitive_from_dict(doc["primitive"]))


def primitive_from_dict(doc: dict) -> CollisionPrimitive:
    if not isinstance(doc, dict) or "shape" not in doc:
        raise ParseError("collision primitive requires a 'shape' field")
    shape = doc["shape"]
    try:
        if shape == "sphere":
            return Sphere(doc["center"], doc["radius"])
        if shape == "capsule":
            return Capsule(doc["endpoint_a"], doc["endpoint_b"], doc["radius"])
        if shape == "box":
            return Box(doc["center"], doc["half_extents"], doc.get("orientation", (1, 0, 0, 0)))
    except KeyError as exc:
        raise ParseError(f"{shape} primitive missing field {exc}") from exc
    raise ParseError(f"unknown primitive shape {shape!r}")


def transform_primitive(prim: CollisionPrimitive, frame: RigidTransform) -> CollisionPrimitive:
    """Express a body-frame primitive in the frame's parent (e.g. world)."""
    if isinstance(prim, Sphere):
        return Sphere(frame.apply(prim.center), prim.radius)
    if isinstance(prim, Capsule):
        return Capsule(frame.apply(prim.endpoint_a), frame.apply(prim.endpoint_b), prim.radius)
    if isinstance(prim, Box):
        from .transforms import quat_multiply

        return Box(
            frame.apply(prim.center),
            prim.half_extents,
            quat_multiply(frame.rotation, prim.orientation),
        )
    raise TypeError(f"not a collision primitive: {type(prim).__name__}")


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-30:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _segment_segment_distance(p1, q1, p2, q2) -> float:
    """Closest distance between segments [p1,q1] and [p2,q2] (Ericson 5.1.9)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a < 1e-30 and e < 1e-30:
        return float(np.linalg.norm(r))
    if a < 1e-30:
        s = 0.0
        t = float(np.clip(f / e, 0.0, 1.0))
    else:
        c = float(d1 @ r)
        if e < 1e-30:
            t = 0.0
            s = float(np.clip(-c / a, 0.0, 1.0))
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = float(np.clip((b * f - c * e) / denom, 0.0, 1.0)) if denom > 1e-30 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = float(np.clip(-c / a, 0.0, 1.0))
            elif t > 1.0:
                t = 1.0
                s = float(np.clip((b - c) / a, 0.0, 1.0))
    closest1 = p1 + s * d1
    closest2 = p2 + t * d2
    return float(np.linalg.norm(closest1 - closest2))


def _box_sdf_points(box: Box, points: np.ndarray) -> np.ndarray:
    """Signed distance from each point to the box surface (negative inside)."""
    from .transforms import quat_to_matrix

    rot = quat_to_matrix(box.orientation)
    local = (np.atleast_2d(points) - box.center) @ rot  # == rot.T applied per row
    d = np.abs(local) - box.half_extents
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
    inside = np.minimum(np.max(d, axis=1), 0.0)
    return outside + inside


def _box_corners(box: Box) -> np.ndarray:
    from .transforms import quat_to_matrix

    rot = quat_to_matrix(box.orientation)
    signs = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float
    )
    return box.center + (signs * box.half_extents) @ rot.T


_BOX_EDGE_PAIRS = [
    (0, 1), (2, 3), (4, 5), (6, 7),  # z edges
    (0, 2), (1, 3), (4, 6), (5, 7),  # y edges
    (0, 4), (1, 5), (2, 6), (3, 7),  # x edges
]


def _sampled_segment_box_distance(a: np.ndarray, b: np.ndarray, box: Box, samples: int) -> float:
    """Conservative distance from segment to box surface via SDF sampling.

    The box SDF is 1-Lipschitz, so subtracting half the sample spacing makes
    the result a lower bound on the true segment/box distance.
    """
    ts = np.linspace(0.0, 1.0, samples)
    points = a + np.outer(ts, b - a)
    spacing = float(np.linalg.norm(b - a)) / (samples - 1)
    return float(np.min(_box_sdf_points(box, points))) - 0.5 * spacing


def _box_box_distance(a: Box, b: Box) -> float:
    best = math.inf
    for first, second in ((a, b), (b, a)):
        corners = _box_corners(first)
        for i, j in _BOX_EDGE_PAIRS:
            best = min(
                best,
                _sampled_segment_box_distance(corners[i], corners[j], second, _EDGE_SAMPLES),
            )
    return best


def primitive_distance(a: CollisionPrimitive, b: CollisionPrimitive) -> float:
    """Signed separation in meters; negative values bound penetration depth.

    Both primitives must be expressed in a common frame.
    """
    if isinstance(a, Sphere) and isinstance(b, Sphere):
        return float(np.linalg.norm(a.center - b.center)) - a.radius - b.radius
    if isinstance(a, Sphere) and isinstance(b, Capsule):
        return _point_segment_distance(a.center, b.endpoint_a, b.endpoint_b) - a.radius - b.radius
    if isinstance(a, Capsule) and isinstance(b, Sphere):
        return primitive_distance(b, a)
    if isinstance(a, Capsule) and isinstance(b, Capsule):
        gap = _segment_segment_distance(a.endpoint_a, a.endpoint_b, b.endpoint_a, b.endpoint_b)
        return gap - a.radius - b.radius
    if isinstance(a, Sphere) and isinstance(b, Box):
        return float(_box_sdf_points(b, a.center)[0]) - a.radius
    if isinstance(a, Box) and isinstance(b, Sphere):
        return primitive_distance(b, a)
    if isinstance(a, Capsule) and isinstance(b, Box):
        gap = _sampled_segment_box_distance(a.endpoint_a, a.endpoint_b, b, _CAPSULE_SAMPLES)
        return gap - a.radius
    if isinstance(a, Box) and isinstance(b, Capsule):
        return primitive_distance(b, a)
    if isinstance(a, Box) and isinstance(b, Box):
        return _box_box_distance(a, b)
    raise TypeError(f"unsupported primitive pair: {type(a).__name__}, {type(b).__name__}")
