"""Serial-chain designs, forward kinematics, and pose-error metrics.

A design is a base part plus an ordered list of (part, rule) attachments.
Frame convention for forward kinematics: a child body is placed so that its
input frame coincides with (parent output frame) ∘ (rule transform). An
actuator at angle theta inserts a rotation of theta about its body-frame
joint axis between its own body and its output frames, so the actuator body
is fixed to the parent side and only descendants move.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, IncompatibleRuleError, ParseError, ValidationError
from .library import (
    VIRTUAL_EE_ID,
    Part,
    PartKind,
    PartLibrary,
    load_json_document,
)
from .transforms import (
    RigidTransform,
    quat_conjugate,
    quat_from_axis_angle,
    quat_log,
    quat_multiply,
    quat_to_matrix,
)

DESIGN_FORMAT = "armdesign/1"


@dataclass(frozen=True)
class ChainLink:
    part: str
    rule: str


@dataclass(frozen=True)
class Design:
    """Immutable serial chain: base part id plus ordered attachments."""

    base: str
    links: tuple[ChainLink, ...] = ()

    @property
    def signature(self) -> str:
        return "/".join([self.base, *(link.rule for link in self.links)])

    def part_ids(self) -> list[str]:
        return [self.base, *(link.part for link in self.links)]

    def tip_id(self) -> str:
        return self.links[-1].part if self.links else self.base

    def tip(self, lib: PartLibrary) -> Part:
        return lib.part(self.tip_id())

    def dof(self, lib: PartLibrary) -> int:
        return sum(1 for pid in self.part_ids() if lib.part(pid).kind is PartKind.ACTUATOR)

    def actuators(self, lib: PartLibrary) -> list[Part]:
        return [
            lib.part(pid)
            for pid in self.part_ids()
            if lib.part(pid).kind is PartKind.ACTUATOR
        ]

    def joint_limits(self, lib: PartLibrary) -> tuple[np.ndarray, np.ndarray]:
        los, his = [], []
        for part in self.actuators(lib):
            lo, hi = part.joint.limits
            los.append(lo)
            his.append(hi)
        return np.asarray(los, dtype=float), np.asarray(his, dtype=float)

    def contains_virtual(self) -> bool:
        return any(link.part == VIRTUAL_EE_ID for link in self.links)

    def to_dict(self) -> dict:
        return {
            "format": DESIGN_FORMAT,
            "base": self.base,
            "links": [{"part": l.part, "rule": l.rule} for l in self.links],
        }


def append_part(lib: PartLibrary, design: Design, rule_id: str) -> Design:
    """New design with the rule's child appended at the current tip."""
    tip = design.tip(lib)
    if tip.kind is PartKind.END_EFFECTOR:
        raise IncompatibleRuleError(
            f"design {design.signature!r} is terminated by end-effector {tip.id!r}"
        )
    rule = lib.rule(rule_id)
    if rule.parent_part != tip.id:
        raise IncompatibleRuleError(
            f"rule {rule_id!r} attaches to {rule.parent_part!r}, but the chain tip is {tip.id!r}"
        )
    return Design(
        base=design.base,
        links=design.links + (ChainLink(part=rule.child_part, rule=rule.id),),
    )


def validate_design(lib: PartLibrary, design: Design) -> None:
    """Replay the rule sequence, raising if any step is inconsistent."""
    if design.base not in lib.parts:
        raise ValidationError(f"unknown base part {design.base!r}")
    if lib.part(design.base).kind is not PartKind.BASE:
        raise ValidationError(f"part {design.base!r} is not a Base")
    replayed = Design(base=design.base)
    for link in design.links:
        replayed = append_part(lib, replayed, link.rule)
        if replayed.links[-1].part != link.part:
            raise ValidationError(
                f"rule {link.rule!r} attaches part {replayed.links[-1].part!r}, "
                f"but the design names {link.part!r}"
            )


def design_cost(lib: PartLibrary, design: Design) -> float:
    """Weighted part count: sum of cost_weight over all non-base parts."""
    return float(sum(lib.part(link.part).cost_weight for link in design.links))


def load_design(source) -> Design:
    doc = load_json_document(source, DESIGN_FORMAT)
    if "base" not in doc:
        raise ParseError("design missing 'base'")
    links = []
    for i, entry in enumerate(doc.get("links", [])):
        if "part" not in entry or "rule" not in entry:
            raise ParseError(f"links[{i}]: requires 'part' and 'rule'")
        links.append(ChainLink(part=entry["part"], rule=entry["rule"]))
    return Design(base=doc["base"], links=tuple(links))


def save_design(design: Design) -> bytes:
    """Canonical armdesign/1 bytes; round-trips bit-exactly through load."""
    if design.contains_virtual():
        raise ValidationError("designs containing the virtual end-effector are not serializable")
    return (json.dumps(design.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# Error metrics


class MetricKind(str, Enum):
    POSITION_ONLY = "position_only"
    POSITION_AND_AXIS = "position_and_axis"
    FULL_POSE = "full_pose"


@dataclass(frozen=True, eq=False)
class ErrorMetric:
    """How Δ(target, actual) is measured.

    position_only: squared Euclidean distance of tool points (m²).
    position_and_axis: adds w_rot · (angle between the tool axes)².
    full_pose: adds w_rot · (geodesic rotation angle)².
    ``w_rot`` is in m²/rad², so every value is commensurate in m².
    """

    kind: MetricKind = MetricKind.POSITION_AND_AXIS
    w_rot: float = 0.1
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    @classmethod
    def position_only(cls) -> "ErrorMetric":
        return cls(kind=MetricKind.POSITION_ONLY)

    @classmethod
    def position_and_axis(cls, w_rot: float = 0.1, axis=(0.0, 0.0, 1.0)) -> "ErrorMetric":
        return cls(kind=MetricKind.POSITION_AND_AXIS, w_rot=w_rot, axis=tuple(axis))

    @classmethod
    def full_pose(cls, w_rot: float = 0.1) -> "ErrorMetric":
        return cls(kind=MetricKind.FULL_POSE, w_rot=w_rot)

    @property
    def residual_dim(self) -> int:
        if self.kind is MetricKind.POSITION_ONLY:
            return 3
        if self.kind is MetricKind.POSITION_AND_AXIS:
            return 4
        return 6

    def to_dict(self) -> dict:
        doc: dict = {"type": self.kind.value}
        if self.kind is not MetricKind.POSITION_ONLY:
            doc["w_rot"] = self.w_rot
        if self.kind is MetricKind.POSITION_AND_AXIS:
            doc["axis"] = list(self.axis)
        return doc

    @classmethod
    def from_dict(cls, doc: dict | None) -> "ErrorMetric":
        if doc is None:
            return cls()
        try:
            kind = MetricKind(doc["type"])
        except (KeyError, ValueError):
            raise ParseError(
                f"metric 'type' must be one of {[k.value for k in MetricKind]}"
            ) from None
        if kind is MetricKind.POSITION_ONLY:
            return cls.position_only()
        if kind is MetricKind.POSITION_AND_AXIS:
            return cls.position_and_axis(
                w_rot=float(doc.get("w_rot", 0.1)), axis=tuple(doc.get("axis", (0, 0, 1)))
            )
        return cls.full_pose(w_rot=float(doc.get("w_rot", 0.1)))


def _axis_angle_between(u: np.ndarray, v: np.ndarray) -> float:
    cross = np.cross(u, v)
    return float(np.arctan2(np.linalg.norm(cross), float(u @ v)))


def residual_between(
    target: RigidTransform, actual: RigidTransform, metric: ErrorMetric
) -> np.ndarray:
    """Error-space vector r with ||r||² == pose_error(target, actual, metric)."""
    pos = actual.translation - target.translation
    if metric.kind is MetricKind.POSITION_ONLY:
        return pos
    sw = np.sqrt(metric.w_rot)
    if metric.kind is MetricKind.POSITION_AND_AXIS:
        axis = np.asarray(metric.axis, dtype=float)
        u = actual.rotate(axis)
        v = target.rotate(axis)
        return np.concatenate([pos, [sw * _axis_angle_between(u, v)]])
    rel = quat_multiply(quat_conjugate(target.rotation), actual.rotation)
    return np.concatenate([pos, sw * quat_log(rel)])


def pose_error(target: RigidTransform, actual: RigidTransform, metric: ErrorMetric) -> float:
    """Squared pose deviation Δ² in m², per the selected metric."""
    r = residual_between(target, actual, metric)
    return float(r @ r)


# ---------------------------------------------------------------------------
# Forward kinematics


@dataclass(frozen=True)
class _JointOp:
    axis: np.ndarray  # unit axis in the actuator's body frame
    index: int  # joint index in chain order


class KinematicChain:
    """Design compiled to a flat op list for fast repeated FK and Jacobians.

    Ops alternate constant SE(3) offsets (as rotation matrix + translation)
    with joint rotations. Evaluation records every part's body frame, each
    joint's world origin and axis, and the chain-tip (tool) frame.
    """

    def __init__(self, lib: PartLibrary, design: Design, base_pose: RigidTransform):
        self.design = design
        self.part_ids = design.part_ids()
        ops: list[tuple[np.ndarray, np.ndarray] | _JointOp] = []
        body_markers: list[int] = []  # op count completed before each part's body frame

        current = base_pose
        joint_count = 0

        def flush(frame: RigidTransform):
            ops.append((frame.rotation_matrix(), np.asarray(frame.translation, dtype=float)))

        flush(current)
        body_markers.append(len(ops))
        prev_part = lib.part(design.base)
        for link in design.links:
            rule = lib.rule(link.rule)
            child = lib.part(link.part)
            if prev_part.joint is not None:
                ops.append(_JointOp(axis=prev_part.joint.axis, index=joint_count))
                joint_count += 1
            step = (
                prev_part.output_frames[rule.parent_output_index]
                .compose(rule.transform)
                .compose(child.input_frame.inverse())
            )
            flush(step)
            body_markers.append(len(ops))
            prev_part = child
        self._ops = ops
        self._body_markers = body_markers
        self.dof = joint_count
        lo, hi = design.joint_limits(lib)
        self.lower = lo
        self.upper = hi

    def _check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape != (self.dof,):
            raise DimensionError(
                f"pose has {q.shape[0]} angles but design {self.design.signature!r} "
                f"has {self.dof} degrees of freedom"
            )
        return q

    def evaluate(self, q) -> "ChainState":
        q = self._check_q(q)
        rot = np.eye(3)
        trans = np.zeros(3)
        body_R: list[np.ndarray] = []
        body_t: list[np.ndarray] = []
        joint_origins = np.zeros((self.dof, 3))
        joint_axes = np.zeros((self.dof, 3))
        marker_iter = iter(self._body_markers)
        next_marker = next(marker_iter)
        done = 0
        for op in self._ops:
            if isinstance(op, _JointOp):
                joint_origins[op.index] = trans
                world_axis = rot @ op.axis
                joint_axes[op.index] = world_axis
                rot = rot @ _axis_angle_matrix(op.axis, q[op.index])
            else:
                step_R, step_t = op
                trans = rot @ step_t + trans
                rot = rot @ step_R
            done += 1
            while next_marker is not None and done == next_marker:
                body_R.append(rot)
                body_t.append(trans)
                next_marker = next(marker_iter, None)
        return ChainState(
            part_R=body_R,
            part_t=body_t,
            joint_origins=joint_origins,
            joint_axes=joint_axes,
        )

    def part_frames(self, q) -> list[RigidTransform]:
        state = self.evaluate(q)
        return [
            RigidTransform.from_matrix(_rt_to_matrix(R, t))
            for R, t in zip(state.part_R, state.part_t)
        ]


@dataclass
class ChainState:
    part_R: list[np.ndarray]
    part_t: list[np.ndarray]
    joint_origins: np.ndarray
    joint_axes: np.ndarray

    @property
    def tool_R(self) -> np.ndarray:
        return self.part_R[-1]

    @property
    def tool_t(self) -> np.ndarray:
        return self.part_t[-1]


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    return quat_to_matrix(quat_from_axis_angle(axis, angle))


def _rt_to_matrix(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = R
    m[:3, 3] = t
    return m


def forward_kinematics(
    lib: PartLibrary, design: Design, base_pose: RigidTransform, q
) -> list[RigidTransform]:
    """World body frames for the base and every chain part, in chain order.

    The final element is the chain-tip frame; for designs terminated by an
    end-effector this is the tool frame whose origin is the tool point.
    """
    return KinematicChain(lib, design, base_pose).part_frames(q)
