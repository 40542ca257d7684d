"""Best-first search over the tree of buildable designs.

Nodes are designs; children append one part via a connection rule. Node cost
f = g + h, where g is the weighted part count and h scales the net tracking
error of the design evaluated with an end-effector: the design's own when it
has one, otherwise the zero-cost virtual end-effector attached at the tip
mount. The first node popped that carries the task's end-effector, tracks
every frame within tolerance, and is collision-free wins.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .config import SynthesisConfig
from .errors import ArmSynthError, ValidationError
from .ik import IkConfig, IkResult, solve_ik
from .kinematics import Design, append_part, design_cost
from .library import PartKind, PartLibrary, compatible_rules, virtual_attachment_rule
from .task import Task, discretize


# ---------------------------------------------------------------------------
# Trace events


@dataclass(frozen=True)
class NodeGenerated:
    signature: str
    g: float
    h: float
    f: float


@dataclass(frozen=True)
class NodeExpanded:
    signature: str
    g: float
    h: float
    f: float


@dataclass(frozen=True)
class GoalFound:
    signature: str


@dataclass(frozen=True)
class Exhausted:
    reason: str


TraceEvent = NodeGenerated | NodeExpanded | GoalFound | Exhausted
_TERMINAL = (GoalFound, Exhausted)


def event_to_dict(event: TraceEvent) -> dict:
    doc = {"event": type(event).__name__}
    doc.update(event.__dict__)
    return doc


def event_to_json(event: TraceEvent) -> str:
    return json.dumps(event_to_dict(event), separators=(",", ":"))


def event_from_dict(doc: dict) -> TraceEvent:
    kinds = {cls.__name__: cls for cls in (NodeGenerated, NodeExpanded, GoalFound, Exhausted)}
    data = dict(doc)
    name = data.pop("event")
    return kinds[name](**data)


@dataclass
class SearchTrace:
    """Append-only, time-ordered event log with at most one terminal event."""

    events: list[TraceEvent] = field(default_factory=list)

    def append(self, event: TraceEvent) -> None:
        if self.events and isinstance(self.events[-1], _TERMINAL):
            raise ValidationError("trace already has a terminal event")
        self.events.append(event)

    def to_ndjson(self) -> str:
        return "".join(event_to_json(e) + "\n" for e in self.events)

    @classmethod
    def from_ndjson(cls, text: str) -> "SearchTrace":
        trace = cls()
        for line in text.splitlines():
            if line.strip():
                trace.append(event_from_dict(json.loads(line)))
        return trace


# ---------------------------------------------------------------------------
# Nodes and heuristic evaluation


@dataclass
class SearchNode:
    design: Design
    g: float
    h: float
    f: float
    parent: "SearchNode | None" = None
    cached_ik: IkResult | None = None


def _ik_seed(cfg: SynthesisConfig, signature: str) -> int:
    """Stable per-design RNG seed so evaluation order cannot leak into results."""
    digest = hashlib.blake2b(
        f"{cfg.seed}:{cfg.ik.seed}:{signature}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def evaluation_design(lib: PartLibrary, design: Design) -> Design:
    """The design actually solved: itself if tipped by an end-effector,
    otherwise the design with the virtual end-effector appended transiently."""
    if design.tip(lib).kind is PartKind.END_EFFECTOR:
        return design
    rule = virtual_attachment_rule(lib, design.tip_id(), 0)
    return append_part(lib, design, rule.id)


def evaluate_heuristic(
    lib: PartLibrary, design: Design, task: Task, targets=None
) -> tuple[float, IkResult]:
    """h = heuristic_scale · E_IK of the end-effector-completed design."""
    cfg = task.config
    if targets is None:
        targets = discretize(task.trajectory)
    evaluand = evaluation_design(lib, design)
    ik_cfg = IkConfig(
        max_iterations_per_frame=cfg.ik.max_iterations_per_frame,
        damping=cfg.ik.damping,
        restarts=cfg.ik.restarts,
        convergence_tolerance=cfg.ik.convergence_tolerance,
        seed=_ik_seed(cfg, design.signature),
    )
    result = solve_ik(
        lib,
        evaluand,
        task.base_pose,
        targets,
        obstacles=task.obstacles,
        metric=task.metric,
        cfg=ik_cfg,
    )
    return cfg.heuristic_scale * result.total_error, result


def _make_node(
    lib: PartLibrary,
    design: Design,
    task: Task,
    targets,
    parent: SearchNode | None,
) -> SearchNode:
    g = design_cost(lib, design)
    needs_ik = (
        task.config.heuristic_scale != 0.0
        or design.tip(lib).kind is PartKind.END_EFFECTOR
    )
    if needs_ik:
        h, ik = evaluate_heuristic(lib, design, task, targets)
    else:
        h, ik = 0.0, None  # uniform-cost mode: h == scale · E_IK == 0 regardless
    return SearchNode(design=design, g=g, h=h, f=g + h, parent=parent, cached_ik=ik)


def expand(
    lib: PartLibrary,
    node: SearchNode,
    task: Task,
    *,
    targets=None,
    seen: set[str] | None = None,
    executor: ThreadPoolExecutor | None = None,
) -> list[SearchNode]:
    """Children of a node, one per compatible rule, in library rule order.

    ``seen`` suppresses already-generated signatures for the calling search;
    ``executor`` evaluates children concurrently without changing results.
    """
    tip = node.design.tip(lib)
    if tip.kind is PartKind.END_EFFECTOR:
        raise ValidationError(
            f"node {node.design.signature!r} is terminated by an end-effector"
        )
    if len(node.design.part_ids()) >= task.config.max_parts:
        return []
    if targets is None:
        targets = discretize(task.trajectory)
    designs = []
    for rule in compatible_rules(lib, tip.id):
        child = append_part(lib, node.design, rule.id)
        if seen is not None:
            if child.signature in seen:
                continue
            seen.add(child.signature)
        designs.append(child)
    if executor is not None:
        futures = [
            executor.submit(_make_node, lib, design, task, targets, node)
            for design in designs
        ]
        return [f.result() for f in futures]
    return [_make_node(lib, design, task, targets, node) for design in designs]


# ---------------------------------------------------------------------------
# Search


@dataclass
class SynthesisResult:
    design: Design
    ik: IkResult
    trace: SearchTrace


class SynthesisExhausted(ArmSynthError):
    """No valid design found within the configured bounds."""

    def __init__(
        self,
        reason: str,
        trace: SearchTrace,
        incumbent: Design | None = None,
        incumbent_ik: IkResult | None = None,
    ):
        super().__init__(f"search exhausted: {reason}")
        self.reason = reason
        self.trace = trace
        self.incumbent = incumbent
        self.incumbent_ik = incumbent_ik


class SynthesisCancelled(ArmSynthError):
    def __init__(self, trace: SearchTrace):
        super().__init__("search cancelled")
        self.trace = trace


def _is_goal(lib: PartLibrary, node: SearchNode, task: Task) -> bool:
    tip = node.design.tip(lib)
    if tip.kind is not PartKind.END_EFFECTOR or tip.id != task.end_effector:
        return False
    ik = node.cached_ik
    return (
        ik is not None
        and ik.total_error <= task.config.goal_error_tolerance
        and ik.collision_free
    )


def synthesize(
    lib: PartLibrary,
    task: Task,
    *,
    on_event=None,
    should_stop=None,
) -> SynthesisResult:
    """Run the search; returns the first goal popped from the frontier.

    Pop order is lowest f, ties broken by lower h, then fewer parts, then
    lexicographically smaller signature, making the outcome deterministic
    for a fixed seed. Raises SynthesisExhausted with the best incumbent when
    the bounds are hit, SynthesisCancelled if ``should_stop`` turns true.
    """
    task.validate_against(lib)
    cfg = task.config
    targets = discretize(task.trajectory)
    trace = SearchTrace()

    def emit(event) -> None:
        trace.append(event)
        if on_event is not None:
            on_event(event)

    executor = (
        ThreadPoolExecutor(max_workers=cfg.parallel_workers)
        if cfg.parallel_workers > 1
        else None
    )
    # incumbents for diagnostics: prefer end-effector-tipped designs
    best_goalish: tuple[float, str, SearchNode] | None = None
    best_any: tuple[float, str, SearchNode] | None = None

    def note_incumbent(node: SearchNode) -> None:
        nonlocal best_goalish, best_any
        tip = node.design.tip(lib)
        if tip.kind is PartKind.END_EFFECTOR and tip.id == task.end_effector:
            key = (node.cached_ik.total_error, node.design.signature, node)
            if best_goalish is None or key[:2] < best_goalish[:2]:
                best_goalish = key
        key = (node.h, node.design.signature, node)
        if best_any is None or key[:2] < best_any[:2]:
            best_any = key

    def incumbent_pair() -> tuple[Design | None, IkResult | None]:
        pick = best_goalish or best_any
        if pick is None:
            return None, None
        return pick[2].design, pick[2].cached_ik

    try:
        if task.base is not None:
            roots = [lib.part(task.base)]
        else:
            roots = lib.bases()
        heap: list[tuple[float, float, int, str]] = []
        nodes: dict[str, SearchNode] = {}
        seen: set[str] = set()
        closed: set[str] = set()

        def push(node: SearchNode) -> None:
            sig = node.design.signature
            nodes[sig] = node
            heapq.heappush(heap, (node.f, node.h, len(node.design.part_ids()), sig))
            note_incumbent(node)
            emit(NodeGenerated(signature=sig, g=node.g, h=node.h, f=node.f))

        for base in roots:
            root_design = Design(base=base.id)
            seen.add(root_design.signature)
            push(_make_node(lib, root_design, task, targets, None))

        expansions = 0
        while heap:
            if should_stop is not None and should_stop():
                emit(Exhausted(reason="cancelled"))
                raise SynthesisCancelled(trace)
            _, _, _, sig = heapq.heappop(heap)
            if sig in closed:
                continue
            closed.add(sig)
            node = nodes.pop(sig)
            if _is_goal(lib, node, task):
                if node.design.contains_virtual():
                    raise ValidationError(
                        f"goal design {sig!r} contains the virtual end-effector"
                    )
                emit(GoalFound(signature=sig))
                return SynthesisResult(design=node.design, ik=node.cached_ik, trace=trace)
            tip = node.design.tip(lib)
            if tip.kind is PartKind.END_EFFECTOR:
                continue  # dead leaf: wrong or failing end-effector
            if len(node.design.part_ids()) >= cfg.max_parts:
                continue
            if expansions >= cfg.max_expansions:
                emit(Exhausted(reason="max_expansions"))
                incumbent, incumbent_ik = incumbent_pair()
                raise SynthesisExhausted("max_expansions", trace, incumbent, incumbent_ik)
            expansions += 1
            emit(NodeExpanded(signature=sig, g=node.g, h=node.h, f=node.f))
            for child in expand(
                lib, node, task, targets=targets, seen=seen, executor=executor
            ):
                push(child)
        emit(Exhausted(reason="frontier_empty"))
        incumbent, incumbent_ik = incumbent_pair()
        raise SynthesisExhausted("frontier_empty", trace, incumbent, incumbent_ik)
    finally:
        if executor is not None:
            executor.shutdown(wait=False)
