"""Solver and search configuration records shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ParseError, ValidationError

TIE_BREAK_POLICY = "h-then-parts-then-signature"


@dataclass(frozen=True)
class IkConfig:
    """Damped-least-squares settings for per-frame inverse kinematics."""

    max_iterations_per_frame: int = 200
    damping: float = 1e-3
    restarts: int = 5
    convergence_tolerance: float = 1e-8  # m² improvement per accepted step
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations_per_frame <= 0:
            raise ValidationError("max_iterations_per_frame must be positive")
        if self.damping <= 0:
            raise ValidationError("damping must be positive")
        if self.restarts < 0:
            raise ValidationError("restarts must be >= 0")
        if self.convergence_tolerance <= 0:
            raise ValidationError("convergence_tolerance must be positive")

    def to_dict(self) -> dict:
        return {
            "max_iterations_per_frame": self.max_iterations_per_frame,
            "damping": self.damping,
            "restarts": self.restarts,
            "convergence_tolerance": self.convergence_tolerance,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict | None) -> "IkConfig":
        doc = doc or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ParseError(f"unknown ik config fields {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class SynthesisConfig:
    """Search settings: goal tolerance, heuristic scaling, and bounds.

    ``heuristic_scale`` converts the tracking error (m²) into part-cost
    units; 0 disables the heuristic entirely (uniform-cost search).
    ``parallel_workers`` > 1 evaluates generated children concurrently;
    results are identical either way.
    """

    goal_error_tolerance: float = 1e-4  # m², summed over trajectory frames
    heuristic_scale: float = 1.0
    max_parts: int = 12
    max_expansions: int = 50000
    tie_break: str = TIE_BREAK_POLICY
    seed: int = 0
    parallel_workers: int = 1
    ik: IkConfig = field(default_factory=IkConfig)

    def __post_init__(self):
        if self.goal_error_tolerance <= 0:
            raise ValidationError("goal_error_tolerance must be > 0")
        if self.max_parts < 2:
            raise ValidationError("max_parts must be >= 2")
        if self.max_expansions <= 0:
            raise ValidationError("max_expansions must be positive")
        if self.heuristic_scale < 0:
            raise ValidationError("heuristic_scale must be >= 0")
        if self.tie_break != TIE_BREAK_POLICY:
            raise ValidationError(f"tie_break must be {TIE_BREAK_POLICY!r}")
        if self.parallel_workers < 1:
            raise ValidationError("parallel_workers must be >= 1")

    def with_seed(self, seed: int) -> "SynthesisConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "goal_error_tolerance": self.goal_error_tolerance,
            "heuristic_scale": self.heuristic_scale,
            "max_parts": self.max_parts,
            "max_expansions": self.max_expansions,
            "tie_break": self.tie_break,
            "seed": self.seed,
            "parallel_workers": self.parallel_workers,
            "ik": self.ik.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict | None) -> "SynthesisConfig":
        doc = dict(doc or {})
        ik = IkConfig.from_dict(doc.pop("ik", None))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ParseError(f"unknown config fields {sorted(unknown)}")
        return cls(ik=ik, **doc)
