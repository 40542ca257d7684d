"""Arm-vs-obstacle and self-collision screening for a single pose.

Re-exports the primitive shapes and distance query so callers can treat this
module as the single collision surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .kinematics import Design, KinematicChain
from .library import PartLibrary
from .shapes import (
    DEFAULT_CLEARANCE,
    Box,
    Capsule,
    CollisionPrimitive,
    Obstacle,
    Sphere,
    primitive_distance,
    primitive_from_dict,
    transform_primitive,
)
from .transforms import RigidTransform

__all__ = [
    "DEFAULT_CLEARANCE",
    "Box",
    "Capsule",
    "CollisionPrimitive",
    "Obstacle",
    "Sphere",
    "Contact",
    "CollisionReport",
    "primitive_distance",
    "primitive_from_dict",
    "transform_primitive",
    "check_pose_collisions",
]


@dataclass(frozen=True)
class Contact:
    """One offending pair: a part primitive against an obstacle or another part."""

    kind: str  # "obstacle" or "self"
    part_index: int
    part_id: str
    other: str  # obstacle id, or the other part id for self contacts
    other_index: int | None
    distance: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "part_index": self.part_index,
            "part_id": self.part_id,
            "other": self.other,
            "other_index": self.other_index,
            "distance": self.distance,
        }


@dataclass
class CollisionReport:
    contacts: list[Contact] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.contacts

    def to_dict(self) -> dict:
        return {"contacts": [c.to_dict() for c in self.contacts]}


def check_pose_collisions(
    lib: PartLibrary,
    design: Design,
    base_pose: RigidTransform,
    q,
    obstacles: list[Obstacle] | tuple[Obstacle, ...] = (),
    clearance: float = DEFAULT_CLEARANCE,
) -> CollisionReport:
    """Screen one pose: obstacle pairs closer than ``clearance`` and
    penetrating non-adjacent self pairs. An empty report means the pose is
    admissible. Chain-adjacent parts are skipped (they touch at mounts by
    construction).
    """
    chain = KinematicChain(lib, design, base_pose)
    frames = chain.part_frames(q)
    return check_frame_collisions(lib, design, frames, obstacles, clearance)


def check_frame_collisions(
    lib: PartLibrary,
    design: Design,
    frames: list[RigidTransform],
    obstacles: list[Obstacle] | tuple[Obstacle, ...] = (),
    clearance: float = DEFAULT_CLEARANCE,
) -> CollisionReport:
    """Same screening as check_pose_collisions, with FK frames precomputed."""
    part_ids = design.part_ids()
    world_geometry: list[list[CollisionPrimitive]] = []
    for pid, frame in zip(part_ids, frames):
        part = lib.part(pid)
        world_geometry.append(
            [transform_primitive(prim, frame) for prim in part.collision_geometry]
        )

    report = CollisionReport()
    for i, prims in enumerate(world_geometry):
        for prim in prims:
            for obstacle in obstacles:
                dist = primitive_distance(prim, obstacle.primitive)
                if dist < clearance:
                    report.contacts.append(
                        Contact(
                            kind="obstacle",
                            part_index=i,
                            part_id=part_ids[i],
                            other=obstacle.id,
                            other_index=None,
                            distance=dist,
                        )
                    )
    n = len(world_geometry)
    for i in range(n):
        if not world_geometry[i]:
            continue
        for j in range(i + 2, n):  # skip self and adjacent
            if not world_geometry[j]:
                continue
            worst = min(
                primitive_distance(pa, pb)
                for pa in world_geometry[i]
                for pb in world_geometry[j]
            )
            if worst < 0.0:
                report.contacts.append(
                    Contact(
                        kind="self",
                        part_index=i,
                        part_id=part_ids[i],
                        other=part_ids[j],
                        other_index=j,
                        distance=worst,
                    )
                )
    return report
