"""Result documents shared by the CLI and the HTTP service.

Playback transforms are computed here, server-side, so clients never have to
re-derive forward kinematics.
"""

from __future__ import annotations

import json

from .collision import check_frame_collisions
from .ik import IkResult
from .kinematics import Design, KinematicChain, design_cost
from .library import PartLibrary
from .task import Task, discretize, sample_times


def build_result_document(
    lib: PartLibrary, design: Design, task: Task, ik: IkResult
) -> dict:
    """Design, per-frame errors and poses, playback transforms, collisions."""
    targets = discretize(task.trajectory)
    chain = KinematicChain(lib, design, task.base_pose)
    frames = []
    contacts = []
    for i in range(len(targets)):
        part_frames = chain.part_frames(ik.poses[i])
        frames.append([f.to_dict() for f in part_frames])
        report = check_frame_collisions(lib, design, part_frames, task.obstacles)
        contacts.append(report.to_dict()["contacts"])
    return {
        "design": design.to_dict(),
        "dof": design.dof(lib),
        "cost": design_cost(lib, design),
        "ik": ik.to_dict(),
        "collision_report": contacts,
        "playback": {
            "part_ids": design.part_ids(),
            "frames": frames,
            "targets": [t.to_dict() for t in targets],
            "times": sample_times(task.trajectory),
        },
    }


def dump_document(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
