"""Shared fixture libraries and oracle helpers."""

from __future__ import annotations

import json

import numpy as np
import pytest

from armsynth import (
    Design,
    ErrorMetric,
    ExplicitTrajectory,
    PartLibrary,
    RigidTransform,
    Task,
    append_part,
    forward_kinematics,
    load_library,
)
from armsynth.config import IkConfig, SynthesisConfig


def frame(translation=(0, 0, 0), rotation=(1, 0, 0, 0)) -> dict:
    return {"rotation": list(rotation), "translation": list(translation)}


def minimal_library_doc() -> dict:
    """1 base, 1 actuator, 1 end-effector, 2 rules: the smallest useful file."""
    return {
        "format": "armlib/1",
        "parts": [
            {"id": "base", "kind": "Base", "output_frames": [frame()]},
            {
                "id": "act",
                "kind": "Actuator",
                "joint": {"axis": [0, 0, 1]},
                "output_frames": [frame((0.5, 0, 0))],
            },
            {"id": "grip", "kind": "EndEffector"},
        ],
        "rules": [
            {"id": "r0", "parent_part": "base", "child_part": "act"},
            {"id": "r1", "parent_part": "act", "child_part": "grip"},
        ],
    }


def planar_library_doc(lengths=(1.0, 1.0), geometry: float | None = None) -> dict:
    """Planar arm kit: z-axis actuators, one link part per distinct length.

    ``geometry`` adds a capsule of that radius along each link (inset from the
    mounts so chains that merely touch at joints stay collision-free) and a
    small sphere on each actuator.
    """
    parts = [
        {"id": "base", "kind": "Base", "output_frames": [frame()]},
        {"id": "grip", "kind": "EndEffector"},
    ]
    act = {
        "id": "act",
        "kind": "Actuator",
        "joint": {"axis": [0, 0, 1]},
        "output_frames": [frame()],
    }
    if geometry:
        act["collision_geometry"] = [
            {"shape": "sphere", "center": [0, 0, 0], "radius": geometry}
        ]
    parts.append(act)
    rules = [{"id": "r-base-act", "parent_part": "base", "child_part": "act"}]
    for length in sorted(set(float(l) for l in lengths)):
        link_id = f"link{length:g}"
        link = {
            "id": link_id,
            "kind": "Link",
            "output_frames": [frame((length, 0, 0))],
        }
        if geometry:
            inset = 1.5 * geometry
            link["collision_geometry"] = [
                {
                    "shape": "capsule",
                    "endpoint_a": [inset, 0, 0],
                    "endpoint_b": [length - inset, 0, 0],
                    "radius": geometry,
                }
            ]
        parts.append(link)
        rules.append({"id": f"r-act-{link_id}", "parent_part": "act", "child_part": link_id})
        rules.append({"id": f"r-{link_id}-act", "parent_part": link_id, "child_part": "act"})
        rules.append({"id": f"r-{link_id}-grip", "parent_part": link_id, "child_part": "grip"})
    return {"format": "armlib/1", "parts": parts, "rules": rules}


def load_doc(doc: dict) -> PartLibrary:
    return load_library(json.dumps(doc))


def planar_arm(lib: PartLibrary, lengths=(1.0, 1.0), gripper=True) -> Design:
    """Design [base, act, link(l0), act, link(l1), ..., grip]."""
    design = Design(base="base")
    design = append_part(lib, design, "r-base-act")
    for i, length in enumerate(lengths):
        link_id = f"link{float(length):g}"
        design = append_part(lib, design, f"r-act-{link_id}")
        if i + 1 < len(lengths):
            design = append_part(lib, design, f"r-{link_id}-act")
        elif gripper:
            design = append_part(lib, design, f"r-{link_id}-grip")
    return design


def planar_tip(lengths, q) -> np.ndarray:
    """Closed-form planar arm tip position (the FK oracle)."""
    angles = np.cumsum(q)
    x = float(np.sum(np.asarray(lengths) * np.cos(angles)))
    y = float(np.sum(np.asarray(lengths) * np.sin(angles)))
    return np.array([x, y, 0.0])


def spatial_library_doc() -> dict:
    """3D kit: z- and y-axis actuators, two link lengths, one gripper."""
    return {
        "format": "armlib/1",
        "parts": [
            {"id": "base", "kind": "Base", "output_frames": [frame((0, 0, 0.1))]},
            {
                "id": "yaw",
                "kind": "Actuator",
                "joint": {"axis": [0, 0, 1]},
                "output_frames": [frame((0, 0, 0.05))],
            },
            {
                "id": "pitch",
                "kind": "Actuator",
                "joint": {"axis": [0, 1, 0]},
                "output_frames": [frame((0, 0, 0.05))],
            },
            {
                "id": "arm_s",
                "kind": "Link",
                "output_frames": [frame((0, 0, 0.3))],
            },
            {
                "id": "arm_l",
                "kind": "Link",
                "output_frames": [frame((0, 0, 0.6))],
            },
            {"id": "tool", "kind": "EndEffector"},
        ],
        "rules": [
            {"id": "b-yaw", "parent_part": "base", "child_part": "yaw"},
            {"id": "yaw-pitch", "parent_part": "yaw", "child_part": "pitch"},
            {"id": "pitch-s", "parent_part": "pitch", "child_part": "arm_s"},
            {"id": "pitch-l", "parent_part": "pitch", "child_part": "arm_l"},
            {"id": "s-pitch", "parent_part": "arm_s", "child_part": "pitch"},
            {"id": "l-pitch", "parent_part": "arm_l", "child_part": "pitch"},
            {"id": "s-tool", "parent_part": "arm_s", "child_part": "tool"},
            {"id": "l-tool", "parent_part": "arm_l", "child_part": "tool"},
            {"id": "yaw-tool", "parent_part": "yaw", "child_part": "tool"},
        ],
    }


def random_design(lib: PartLibrary, rng: np.random.Generator, max_parts: int = 7) -> Design:
    """Random rule walk from the first base, terminated by an end-effector
    when possible; retries until the design has at least one joint."""
    from armsynth.library import PartKind, compatible_rules

    while True:
        design = Design(base=lib.bases()[0].id)
        for _ in range(max_parts - 1):
            rules = compatible_rules(lib, design.tip_id())
            if not rules:
                break
            terminal = [r for r in rules if lib.part(r.child_part).kind is PartKind.END_EFFECTOR]
            growing = [r for r in rules if r not in terminal]
            if len(design.part_ids()) >= max_parts - 1 and terminal:
                pick = terminal[rng.integers(len(terminal))]
            elif growing and rng.random() > 0.25:
                pick = growing[rng.integers(len(growing))]
            elif terminal:
                pick = terminal[rng.integers(len(terminal))]
            else:
                pick = rules[rng.integers(len(rules))]
            design = append_part(lib, design, pick.id)
            if lib.part(design.tip_id()).kind is PartKind.END_EFFECTOR:
                break
        if design.dof(lib) >= 1:
            return design


def random_pose(lib: PartLibrary, design: Design, rng: np.random.Generator) -> np.ndarray:
    lo, hi = design.joint_limits(lib)
    return rng.uniform(lo, hi)


def record_trajectory(
    lib: PartLibrary, design: Design, poses, base_pose=RigidTransform.identity()
) -> ExplicitTrajectory:
    """Trajectory whose frames are the design's own FK tool frames (oracle)."""
    frames = [forward_kinematics(lib, design, base_pose, q)[-1] for q in poses]
    return ExplicitTrajectory(frames)


def quick_task(trajectory, end_effector="grip", **kwargs) -> Task:
    config = kwargs.pop(
        "config",
        SynthesisConfig(max_parts=8, ik=IkConfig(restarts=3, max_iterations_per_frame=120)),
    )
    metric = kwargs.pop("metric", ErrorMetric.position_only())
    return Task(
        trajectory=trajectory,
        end_effector=end_effector,
        metric=metric,
        config=config,
        **kwargs,
    )


@pytest.fixture
def minimal_lib() -> PartLibrary:
    return load_doc(minimal_library_doc())


@pytest.fixture
def planar_lib() -> PartLibrary:
    return load_doc(planar_library_doc((1.0,)))


@pytest.fixture
def planar2_lib() -> PartLibrary:
    return load_doc(planar_library_doc((1.0, 1.0)))


@pytest.fixture
def spatial_lib() -> PartLibrary:
    return load_doc(spatial_library_doc())
