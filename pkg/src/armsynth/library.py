"""Part and connection-rule definitions, validation, and the armlib/1 format.

A library is the catalog the synthesizer draws from: rigid parts (bases,
actuators, links, end-effectors) with attachment frames, and connection rules
stating which part may attach to which, at what relative transform. Parts are
reusable without stock limits.
"""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParseError, UnknownIdError, ValidationError
from .shapes import CollisionPrimitive, primitive_from_dict
from .transforms import IDENTITY, RigidTransform, _as_vec

LIBRARY_FORMAT = "armlib/1"
VIRTUAL_EE_ID = "~virtual-ee"
_VIRTUAL_RULE_PREFIX = "~virt/"
_ID_PATTERN = re.compile(r"^[A-Za-z0-9_.\-]+$")
DEFAULT_JOINT_LIMITS = (-math.pi, math.pi)


class PartKind(str, Enum):
    BASE = "Base"
    ACTUATOR = "Actuator"
    LINK = "Link"
    END_EFFECTOR = "EndEffector"


@dataclass(frozen=True, eq=False)
class JointSpec:
    """Revolute joint: unit axis in the part's body frame, limits in radians."""

    axis: np.ndarray
    limits: tuple[float, float] = DEFAULT_JOINT_LIMITS

    def __init__(self, axis, limits=DEFAULT_JOINT_LIMITS):
        object.__setattr__(self, "axis", _as_vec(axis, 3, "joint axis"))
        lo, hi = float(limits[0]), float(limits[1])
        object.__setattr__(self, "limits", (lo, hi))

    def to_dict(self) -> dict:
        return {"axis": self.axis.tolist(), "limits": list(self.limits)}


@dataclass(frozen=True, eq=False)
class Part:
    """Rigid body with one input mount and zero or more output mounts.

    ``input_frame`` is the pose of the mount point in this part's body frame;
    ``output_frames`` are mounts offered to children. An end-effector's tool
    point is its body-frame origin.
    """

    id: str
    kind: PartKind
    cost_weight: float = 1.0
    input_frame: RigidTransform = field(default_factory=RigidTransform.identity)
    output_frames: tuple[RigidTransform, ...] = ()
    joint: JointSpec | None = None
    collision_geometry: tuple[CollisionPrimitive, ...] = ()

    def to_dict(self) -> dict:
        doc = {
            "id": self.id,
            "kind": self.kind.value,
            "cost_weight": self.cost_weight,
            "input_frame": self.input_frame.to_dict(),
            "output_frames": [f.to_dict() for f in self.output_frames],
            "collision_geometry": [p.to_dict() for p in self.collision_geometry],
        }
        if self.joint is not None:
            doc["joint"] = self.joint.to_dict()
        return doc


@dataclass(frozen=True, eq=False)
class ConnectionRule:
    """States that ``child_part`` may attach to ``parent_part``.

    ``transform`` is the pose of the child's input frame relative to the
    selected parent output frame at the time of connection.
    """

    id: str
    parent_part: str
    child_part: str
    parent_output_index: int = 0
    transform: RigidTransform = field(default_factory=RigidTransform.identity)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "parent_part": self.parent_part,
            "child_part": self.child_part,
            "parent_output_index": self.parent_output_index,
            "transform": self.transform.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class PartLibrary:
    """Validated, immutable catalog of parts and connection rules."""

    parts: dict[str, Part]
    rules: tuple[ConnectionRule, ...]
    _rules_by_id: dict[str, ConnectionRule] = field(repr=False, default_factory=dict)
    _rules_by_parent: dict[str, tuple[ConnectionRule, ...]] = field(repr=False, default_factory=dict)

    def __init__(self, parts, rules):
        parts = {p.id: p for p in parts} if not isinstance(parts, dict) else dict(parts)
        rules = tuple(rules)
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "_rules_by_id", {r.id: r for r in rules})
        by_parent: dict[str, list[ConnectionRule]] = {}
        for rule in rules:
            by_parent.setdefault(rule.parent_part, []).append(rule)
        object.__setattr__(
            self, "_rules_by_parent", {k: tuple(v) for k, v in by_parent.items()}
        )
        _validate_library(self)

    def part(self, part_id: str) -> Part:
        if part_id == VIRTUAL_EE_ID:
            return virtual_end_effector(self)
        try:
            return self.parts[part_id]
        except KeyError:
            raise UnknownIdError(f"unknown part id {part_id!r}") from None

    def rule(self, rule_id: str) -> ConnectionRule:
        if rule_id.startswith(_VIRTUAL_RULE_PREFIX):
            return _parse_virtual_rule(self, rule_id)
        try:
            return self._rules_by_id[rule_id]
        except KeyError:
            raise UnknownIdError(f"unknown rule id {rule_id!r}") from None

    def bases(self) -> list[Part]:
        return [p for p in self.parts.values() if p.kind is PartKind.BASE]

    def to_dict(self) -> dict:
        return {
            "format": LIBRARY_FORMAT,
            "parts": [p.to_dict() for p in self.parts.values()],
            "rules": [r.to_dict() for r in self.rules],
        }


def _check_id(kind: str, value) -> str:
    if not isinstance(value, str) or not _ID_PATTERN.match(value):
        raise ValidationError(
            f"{kind} id {value!r} is invalid: ids must match {_ID_PATTERN.pattern}"
        )
    return value


def _validate_library(lib: PartLibrary) -> None:
    if len(lib._rules_by_id) != len(lib.rules):
        seen: set[str] = set()
        for rule in lib.rules:
            if rule.id in seen:
                raise ValidationError(f"duplicate rule id {rule.id!r}")
            seen.add(rule.id)
    for part in lib.parts.values():
        _check_id("part", part.id)
        if part.cost_weight < 0:
            raise ValidationError(f"part {part.id!r}: cost_weight must be >= 0")
        if part.kind is PartKind.BASE and len(part.output_frames) < 1:
            raise ValidationError(f"base part {part.id!r} must have at least one output frame")
        if part.kind is PartKind.END_EFFECTOR and part.output_frames:
            raise ValidationError(
                f"end-effector part {part.id!r} must have zero output frames"
            )
        if (part.joint is not None) != (part.kind is PartKind.ACTUATOR):
            raise ValidationError(
                f"part {part.id!r}: joint data is required for actuators and "
                "forbidden otherwise"
            )
        if part.joint is not None:
            norm = float(np.linalg.norm(part.joint.axis))
            if abs(norm - 1.0) > 1e-9:
                raise ValidationError(
                    f"part {part.id!r}: non-unit joint axis (norm {norm:.9g})"
                )
            lo, hi = part.joint.limits
            if not lo < hi:
                raise ValidationError(f"part {part.id!r}: joint limits must satisfy lo < hi")
    for rule in lib.rules:
        _check_id("rule", rule.id)
        if rule.parent_part not in lib.parts:
            raise ValidationError(
                f"rule {rule.id!r} references missing parent part {rule.parent_part!r}"
            )
        if rule.child_part not in lib.parts:
            raise ValidationError(
                f"rule {rule.id!r} references missing child part {rule.child_part!r}"
            )
        parent = lib.parts[rule.parent_part]
        child = lib.parts[rule.child_part]
        if child.kind is PartKind.BASE:
            raise ValidationError(f"rule {rule.id!r}: child part {child.id!r} is a Base")
        if parent.kind is PartKind.END_EFFECTOR:
            raise ValidationError(
                f"rule {rule.id!r}: parent part {parent.id!r} is an EndEffector"
            )
        if not 0 <= rule.parent_output_index < len(parent.output_frames):
            raise ValidationError(
                f"rule {rule.id!r}: parent_output_index {rule.parent_output_index} "
                f"out of range for part {parent.id!r} "
                f"({len(parent.output_frames)} output frames)"
            )
    if not any(p.kind is PartKind.BASE for p in lib.parts.values()):
        raise ValidationError("library must contain at least one Base part")


def _parse_frame(doc, name: str) -> RigidTransform:
    if doc is None:
        return IDENTITY
    try:
        return RigidTransform.from_dict(doc)
    except ParseError as exc:
        raise ParseError(f"{name}: {exc}") from None


def _parse_part(doc: dict, index: int) -> Part:
    locus = f"parts[{index}]"
    if not isinstance(doc, dict):
        raise ParseError(f"{locus}: part must be an object")
    if "id" not in doc:
        raise ParseError(f"{locus}: missing 'id'")
    pid = doc["id"]
    try:
        kind = PartKind(doc["kind"])
    except KeyError:
        raise ParseError(f"{locus} ({pid!r}): missing 'kind'") from None
    except ValueError:
        raise ParseError(
            f"{locus} ({pid!r}): unknown kind {doc['kind']!r}; expected one of "
            f"{[k.value for k in PartKind]}"
        ) from None
    joint = None
    if "joint" in doc and doc["joint"] is not None:
        jdoc = doc["joint"]
        if "axis" not in jdoc:
            raise ParseError(f"{locus} ({pid!r}): joint missing 'axis'")
        joint = JointSpec(jdoc["axis"], tuple(jdoc.get("limits", DEFAULT_JOINT_LIMITS)))
    geometry = tuple(
        primitive_from_dict(g) for g in doc.get("collision_geometry", ())
    )
    return Part(
        id=pid,
        kind=kind,
        cost_weight=float(doc.get("cost_weight", 1.0)),
        input_frame=_parse_frame(doc.get("input_frame"), f"{locus}.input_frame"),
        output_frames=tuple(
            _parse_frame(f, f"{locus}.output_frames[{i}]")
            for i, f in enumerate(doc.get("output_frames", ()))
        ),
        joint=joint,
        collision_geometry=geometry,
    )


def _parse_rule(doc: dict, index: int) -> ConnectionRule:
    locus = f"rules[{index}]"
    if not isinstance(doc, dict):
        raise ParseError(f"{locus}: rule must be an object")
    for key in ("id", "parent_part", "child_part"):
        if key not in doc:
            raise ParseError(f"{locus}: missing {key!r}")
    return ConnectionRule(
        id=doc["id"],
        parent_part=doc["parent_part"],
        child_part=doc["child_part"],
        parent_output_index=int(doc.get("parent_output_index", 0)),
        transform=_parse_frame(doc.get("transform"), f"{locus}.transform"),
    )


def _read_source(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    raise ParseError(f"unsupported source type {type(source).__name__}")


def load_json_document(source, expected_format: str) -> dict:
    """Decode a versioned JSON document, checking its ``format`` header."""
    text = _read_source(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    fmt = doc.get("format")
    if fmt != expected_format:
        raise ParseError(f"expected format {expected_format!r}, got {fmt!r}")
    return doc


def load_library(source) -> PartLibrary:
    """Parse and validate an armlib/1 document from bytes, text, or a stream."""
    doc = load_json_document(source, LIBRARY_FORMAT)
    parts_doc = doc.get("parts")
    rules_doc = doc.get("rules", [])
    if not isinstance(parts_doc, list):
        raise ParseError("'parts' must be a list")
    if not isinstance(rules_doc, list):
        raise ParseError("'rules' must be a list")
    parts = [_parse_part(p, i) for i, p in enumerate(parts_doc)]
    ids = [p.id for p in parts]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValidationError(f"duplicate part ids {dupes}")
    rules = [_parse_rule(r, i) for i, r in enumerate(rules_doc)]
    return PartLibrary(parts, rules)


def save_library(lib: PartLibrary) -> bytes:
    """Canonical armlib/1 bytes; load_library(save_library(lib)) == lib."""
    return (json.dumps(lib.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")


def compatible_rules(lib: PartLibrary, tip: str) -> list[ConnectionRule]:
    """Rules whose parent is ``tip``, in library (file) order."""
    if tip != VIRTUAL_EE_ID and tip not in lib.parts:
        raise UnknownIdError(f"unknown part id {tip!r}")
    return list(lib._rules_by_parent.get(tip, ()))


def virtual_end_effector(lib: PartLibrary) -> Part:
    """Zero-cost synthetic chain terminator used for heuristic evaluation.

    Attachable to every non-end-effector part at any output frame through an
    identity transform (see :func:`virtual_attachment_rule`); its tool point
    sits at the mount itself. Never serialized into designs or files.
    """
    return Part(
        id=VIRTUAL_EE_ID,
        kind=PartKind.END_EFFECTOR,
        cost_weight=0.0,
        input_frame=IDENTITY,
        output_frames=(),
        joint=None,
        collision_geometry=(),
    )


def virtual_attachment_rule(
    lib: PartLibrary, parent_id: str, output_index: int = 0
) -> ConnectionRule:
    """Synthetic identity-transform rule attaching the virtual end-effector."""
    parent = lib.part(parent_id)
    if parent.kind is PartKind.END_EFFECTOR:
        raise ValidationError(f"cannot attach virtual end-effector to end-effector {parent_id!r}")
    if not 0 <= output_index < len(parent.output_frames):
        raise ValidationError(
            f"part {parent_id!r} has no output frame {output_index}"
        )
    return ConnectionRule(
        id=f"{_VIRTUAL_RULE_PREFIX}{parent_id}/{output_index}",
        parent_part=parent_id,
        child_part=VIRTUAL_EE_ID,
        parent_output_index=output_index,
        transform=IDENTITY,
    )


def _parse_virtual_rule(lib: PartLibrary, rule_id: str) -> ConnectionRule:
    body = rule_id[len(_VIRTUAL_RULE_PREFIX):]
    parent_id, _, index_text = body.rpartition("/")
    if not parent_id or not index_text.isdigit():
        raise UnknownIdError(f"malformed virtual rule id {rule_id!r}")
    return virtual_attachment_rule(lib, parent_id, int(index_text))
