"""Task specification: base placement, trajectory, obstacles, and config.

Trajectories are either explicit frame lists or parametric curves (line,
arc, helix). Parametric curves are sampled at n uniformly spaced parameter
values including both endpoints; orientation along a curve points the tool
z-axis down the tangent and transports the remaining roll with minimal
twist, so discretization is fully deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SynthesisConfig
from .errors import ParseError, ValidationError
from .kinematics import ErrorMetric
from .library import PartLibrary, PartKind, load_json_document
from .shapes import Obstacle
from .transforms import RigidTransform, quat_from_matrix, _as_vec

TASK_FORMAT = "armtask/1"
DEFAULT_SAMPLES = 20
_DEGENERATE_LENGTH = 1e-12


@dataclass(frozen=True, eq=False)
class ExplicitTrajectory:
    frames: tuple[RigidTransform, ...]
    times: tuple[float, ...]

    def __init__(self, frames, times=None):
        frames = tuple(frames)
        if not frames:
            raise ValidationError("trajectory needs at least one frame")
        if times is None:
            times = tuple(float(i) for i in range(len(frames)))
        times = tuple(float(t) for t in times)
        if len(times) != len(frames):
            raise ValidationError("one timestamp per frame required")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("timestamps must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return len(self.frames)

    def to_dict(self) -> dict:
        return {
            "kind": "explicit",
            "frames": [
                {**f.to_dict(), "t": t} for f, t in zip(self.frames, self.times)
            ],
        }


@dataclass(frozen=True, eq=False)
class LineTrajectory:
    start: np.ndarray
    end: np.ndarray
    duration: float = 1.0
    n: int = DEFAULT_SAMPLES

    def __init__(self, start, end, duration=1.0, n=DEFAULT_SAMPLES):
        object.__setattr__(self, "start", _as_vec(start, 3, "start"))
        object.__setattr__(self, "end", _as_vec(end, 3, "end"))
        object.__setattr__(self, "duration", float(duration))
        object.__setattr__(self, "n", int(n))
        _check_samples(self.n, self.duration)

    def to_dict(self) -> dict:
        return {
            "kind": "line",
            "start": self.start.tolist(),
            "end": self.end.tolist(),
            "duration": self.duration,
            "n": self.n,
        }


@dataclass(frozen=True, eq=False)
class ArcTrajectory:
    """Circular arc: sweep ``angle`` radians about ``normal`` through ``center``,
    starting at the point ``start``."""

    center: np.ndarray
    normal: np.ndarray
    start: np.ndarray
    angle: float
    duration: float = 1.0
    n: int = DEFAULT_SAMPLES

    def __init__(self, center, normal, start, angle, duration=1.0, n=DEFAULT_SAMPLES):
        object.__setattr__(self, "center", _as_vec(center, 3, "center"))
        normal = _as_vec(normal, 3, "normal")
        nn = float(np.linalg.norm(normal))
        if abs(nn - 1.0) > 1e-6:
            raise ValidationError(f"arc normal must be a unit vector (norm {nn:.6g})")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "start", _as_vec(start, 3, "start"))
        object.__setattr__(self, "angle", float(angle))
        object.__setattr__(self, "duration", float(duration))
        object.__setattr__(self, "n", int(n))
        _check_samples(self.n, self.duration)

    def to_dict(self) -> dict:
        return {
            "kind": "arc",
            "center": self.center.tolist(),
            "normal": self.normal.tolist(),
            "start": self.start.tolist(),
            "angle": self.angle,
            "duration": self.duration,
            "n": self.n,
        }


@dataclass(frozen=True, eq=False)
class HelixTrajectory:
    """Helix about ``axis`` from ``center``: radius, advance per turn (pitch),
    and total number of turns."""

    center: np.ndarray
    axis: np.ndarray
    radius: float
    pitch: float
    turns: float
    duration: float = 1.0
    n: int = DEFAULT_SAMPLES

    def __init__(self, center, axis, radius, pitch, turns, duration=1.0, n=DEFAULT_SAMPLES):
        object.__setattr__(self, "center", _as_vec(center, 3, "center"))
        axis = _as_vec(axis, 3, "axis")
        nn = float(np.linalg.norm(axis))
        if abs(nn - 1.0) > 1e-6:
            raise ValidationError(f"helix axis must be a unit vector (norm {nn:.6g})")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "radius", float(radius))
        object.__setattr__(self, "pitch", float(pitch))
        object.__setattr__(self, "turns", float(turns))
        object.__setattr__(self, "duration", float(duration))
        object.__setattr__(self, "n", int(n))
        if self.radius <= 0:
            raise ValidationError("helix radius must be > 0")
        _check_samples(self.n, self.duration)

    def to_dict(self) -> dict:
        return {
            "kind": "helix",
            "center": self.center.tolist(),
            "axis": self.axis.tolist(),
            "radius": self.radius,
            "pitch": self.pitch,
            "turns": self.turns,
            "duration": self.duration,
            "n": self.n,
        }


Trajectory = ExplicitTrajectory | LineTrajectory | ArcTrajectory | HelixTrajectory


def _check_samples(n: int, duration: float) -> None:
    if n < 1:
        raise ValidationError("sample count n must be >= 1")
    if duration <= 0:
        raise ValidationError("duration must be > 0")


def trajectory_from_dict(doc: dict) -> Trajectory:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError("trajectory requires a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "explicit":
            frames, times = [], []
            for entry in doc["frames"]:
                frames.append(RigidTransform.from_dict(entry))
                if "t" in entry:
                    times.append(float(entry["t"]))
            return ExplicitTrajectory(frames, times or None)
        if kind == "line":
            return LineTrajectory(
                doc["start"], doc["end"], doc.get("duration", 1.0), doc.get("n", DEFAULT_SAMPLES)
            )
        if kind == "arc":
            return ArcTrajectory(
                doc["center"],
                doc["normal"],
                doc["start"],
                doc["angle"],
                doc.get("duration", 1.0),
                doc.get("n", DEFAULT_SAMPLES),
            )
        if kind == "helix":
            return HelixTrajectory(
                doc["center"],
                doc["axis"],
                doc["radius"],
                doc["pitch"],
                doc["turns"],
                doc.get("duration", 1.0),
                doc.get("n", DEFAULT_SAMPLES),
            )
    except KeyError as exc:
        raise ParseError(f"{kind} trajectory missing field {exc}") from None
    raise ParseError(f"unknown trajectory kind {kind!r}")


def _positions_and_tangents(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Sampled positions plus unit tangents at n uniform parameter values."""
    u = np.linspace(0.0, 1.0, traj.n) if traj.n > 1 else np.array([0.0])
    if isinstance(traj, LineTrajectory):
        direction = traj.end - traj.start
        length = float(np.linalg.norm(direction))
        if length < _DEGENERATE_LENGTH:
            if traj.n > 1:
                raise ValidationError("degenerate line (zero length) with n > 1")
            return traj.start[None, :], np.array([[1.0, 0.0, 0.0]])
        positions = traj.start + np.outer(u, direction)
        tangents = np.tile(direction / length, (traj.n, 1))
        return positions, tangents
    if isinstance(traj, ArcTrajectory):
        radial = traj.start - traj.center
        radial -= traj.normal * float(radial @ traj.normal)
        radius = float(np.linalg.norm(radial))
        if radius < _DEGENERATE_LENGTH or abs(traj.angle) < _DEGENERATE_LENGTH:
            if traj.n > 1:
                raise ValidationError("degenerate arc (zero radius or zero sweep) with n > 1")
            return (traj.center + radial)[None, :], np.array([[1.0, 0.0, 0.0]])
        e1 = radial / radius
        e2 = np.cross(traj.normal, e1)
        phis = u * traj.angle
        positions = (
            traj.center
            + radius * np.outer(np.cos(phis), e1)
            + radius * np.outer(np.sin(phis), e2)
        )
        sign = 1.0 if traj.angle >= 0 else -1.0
        tangents = sign * (-np.outer(np.sin(phis), e1) + np.outer(np.cos(phis), e2))
        return positions, tangents
    if isinstance(traj, HelixTrajectory):
        total_angle = 2.0 * math.pi * traj.turns
        if abs(total_angle) < _DEGENERATE_LENGTH and traj.n > 1:
            raise ValidationError("degenerate helix (zero turns) with n > 1")
        ref = np.array([1.0, 0.0, 0.0])
        if abs(float(ref @ traj.axis)) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        e1 = ref - traj.axis * float(ref @ traj.axis)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(traj.axis, e1)
        phis = u * total_angle
        lift = traj.pitch * traj.turns
        positions = (
            traj.center
            + traj.radius * np.outer(np.cos(phis), e1)
            + traj.radius * np.outer(np.sin(phis), e2)
            + np.outer(u, lift * traj.axis)
        )
        d_angle = total_angle
        tangents = (
            traj.radius * d_angle * (-np.outer(np.sin(phis), e1) + np.outer(np.cos(phis), e2))
            + lift * traj.axis
        )
        norms = np.linalg.norm(tangents, axis=1, keepdims=True)
        if np.any(norms < _DEGENERATE_LENGTH):  # only reachable with n == 1
            return positions, np.tile([1.0, 0.0, 0.0], (traj.n, 1))
        return positions, tangents / norms
    raise TypeError(f"not a trajectory: {type(traj).__name__}")


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    ax = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + s * ax + (1 - c) * (ax @ ax)


def _initial_rotation(t0: np.ndarray) -> np.ndarray:
    """Tool z down the tangent, x from the world axis least aligned with it."""
    candidates = np.eye(3)
    ref = candidates[int(np.argmin(np.abs(candidates @ t0)))]
    x_axis = ref - t0 * float(ref @ t0)
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(t0, x_axis)
    return np.column_stack([x_axis, y_axis, t0])


def _transported_rotations(traj: Trajectory, tangents: np.ndarray) -> list[np.ndarray]:
    """Rotation-minimizing orientation at each sample, in closed form.

    Closed forms (rather than sequential transport) keep every sample an
    exact function of its parameter value, so refining n cannot perturb
    previously sampled endpoints. For a helix, transporting around the
    tangent cone picks up a twist deficit of phi·cos(theta); the second
    rotation below removes exactly that holonomy.
    """
    r0 = _initial_rotation(tangents[0])
    n = len(tangents)
    u = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.0])
    if isinstance(traj, LineTrajectory):
        return [r0] * n
    if isinstance(traj, ArcTrajectory):
        return [_axis_rotation(traj.normal, traj.angle * ui) @ r0 for ui in u]
    if isinstance(traj, HelixTrajectory):
        total_angle = 2.0 * math.pi * traj.turns
        lift = traj.pitch * traj.turns
        speed = math.hypot(traj.radius * total_angle, lift)
        if speed < _DEGENERATE_LENGTH:
            return [r0] * n
        cos_theta = lift / speed
        t0 = tangents[0]
        return [
            _axis_rotation(traj.axis, total_angle * ui)
            @ _axis_rotation(t0, -total_angle * ui * cos_theta)
            @ r0
            for ui in u
        ]
    raise TypeError(f"not a parametric trajectory: {type(traj).__name__}")


def discretize(traj: Trajectory) -> list[RigidTransform]:
    """n target frames; explicit lists pass through unchanged."""
    if isinstance(traj, ExplicitTrajectory):
        return list(traj.frames)
    positions, tangents = _positions_and_tangents(traj)
    rotations = _transported_rotations(traj, tangents)
    return [
        RigidTransform(rotation=quat_from_matrix(rot), translation=position)
        for rot, position in zip(rotations, positions)
    ]


def sample_times(traj: Trajectory) -> list[float]:
    if isinstance(traj, ExplicitTrajectory):
        return list(traj.times)
    if traj.n == 1:
        return [0.0]
    return [traj.duration * i / (traj.n - 1) for i in range(traj.n)]


@dataclass(frozen=True, eq=False)
class Task:
    """Everything the synthesizer needs: where the arm stands, what the tool
    must trace, which end-effector finishes the chain, and solver settings."""

    trajectory: Trajectory
    end_effector: str
    base_pose: RigidTransform = field(default_factory=RigidTransform.identity)
    base: str | None = None  # pin a specific base part; None tries every base
    obstacles: tuple[Obstacle, ...] = ()
    metric: ErrorMetric = field(default_factory=ErrorMetric)
    config: SynthesisConfig = field(default_factory=SynthesisConfig)
    library_ref: str | None = None

    def validate_against(self, lib: PartLibrary) -> None:
        part = lib.part(self.end_effector)  # raises UnknownIdError
        if part.kind is not PartKind.END_EFFECTOR:
            raise ValidationError(
                f"part {self.end_effector!r} has kind {part.kind.value}, expected EndEffector"
            )
        if self.base is not None:
            base = lib.part(self.base)
            if base.kind is not PartKind.BASE:
                raise ValidationError(f"part {self.base!r} is not a Base")

    def with_config(self, config: SynthesisConfig) -> "Task":
        return replace(self, config=config)

    def to_dict(self) -> dict:
        doc = {
            "format": TASK_FORMAT,
            "base_pose": self.base_pose.to_dict(),
            "trajectory": self.trajectory.to_dict(),
            "end_effector": self.end_effector,
            "obstacles": [o.to_dict() for o in self.obstacles],
            "metric": self.metric.to_dict(),
            "config": self.config.to_dict(),
        }
        if self.base is not None:
            doc["base"] = self.base
        if self.library_ref is not None:
            doc["library_ref"] = self.library_ref
        return doc


def load_task(source) -> Task:
    doc = load_json_document(source, TASK_FORMAT)
    if "trajectory" not in doc:
        raise ParseError("task missing 'trajectory'")
    if "end_effector" not in doc:
        raise ParseError("task missing 'end_effector'")
    return Task(
        trajectory=trajectory_from_dict(doc["trajectory"]),
        end_effector=str(doc["end_effector"]),
        base_pose=RigidTransform.from_dict(doc.get("base_pose", {})),
        base=doc.get("base"),
        obstacles=tuple(Obstacle.from_dict(o) for o in doc.get("obstacles", [])),
        metric=ErrorMetric.from_dict(doc.get("metric")),
        config=SynthesisConfig.from_dict(doc.get("config")),
        library_ref=doc.get("library_ref"),
    )


def save_task(task: Task) -> bytes:
    return (json.dumps(task.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")
