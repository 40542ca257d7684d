"""Batch front door: synthesize, validate, FK/IK utilities, experiments.

Exit codes: 0 success, 1 input/validation error, 2 search exhaustion.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ArmSynthError
from .ik import solve_ik
from .kinematics import (
    Design,
    design_cost,
    forward_kinematics,
    load_design,
    save_design,
    validate_design,
)
from .library import PartKind, load_library
from .report import build_result_document, dump_document
from .search import SynthesisExhausted, evaluation_design, synthesize
from .task import discretize, load_task


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _load_inputs(args):
    lib = load_library(_read(args.library))
    task = load_task(_read(args.task))
    if getattr(args, "seed", None) is not None:
        task = task.with_config(task.config.with_seed(args.seed))
    return lib, task


def cmd_synth(args) -> int:
    lib, task = _load_inputs(args)
    try:
        outcome = synthesize(lib, task)
    except SynthesisExhausted as exc:
        print(f"exhausted: {exc.reason}", file=sys.stderr)
        report = {"reason": exc.reason}
        if exc.incumbent is not None:
            report["incumbent"] = exc.incumbent.to_dict()
            report["incumbent_signature"] = exc.incumbent.signature
        if exc.incumbent_ik is not None:
            report["incumbent_total_error"] = exc.incumbent_ik.total_error
        print(json.dumps(report, indent=2, sort_keys=True))
        if args.trace:
            Path(args.trace).write_text(exc.trace.to_ndjson())
        return 2
    Path(args.out).write_bytes(save_design(outcome.design))
    if args.trace:
        Path(args.trace).write_text(outcome.trace.to_ndjson())
    print(
        f"design {outcome.design.signature} "
        f"dof={outcome.design.dof(lib)} cost={design_cost(lib, outcome.design)} "
        f"error={outcome.ik.total_error:.3e}"
    )
    return 0


def cmd_validate(args) -> int:
    lib, task = _load_inputs(args)
    design = load_design(_read(args.design))
    validate_design(lib, design)
    targets = discretize(task.trajectory)
    ik = solve_ik(
        lib,
        evaluation_design(lib, design),
        task.base_pose,
        targets,
        obstacles=task.obstacles,
        metric=task.metric,
        cfg=task.config.ik,
    )
    if args.format == "structured":
        doc = build_result_document(lib, design, task, ik)
        print(dump_document(doc), end="")
        return 0
    if design.tip(lib).kind is not PartKind.END_EFFECTOR:
        print("warning: no end-effector at chain tip; evaluated with the virtual terminator")
    print(f"signature:      {design.signature}")
    print(f"dof:            {design.dof(lib)}")
    print(f"cost:           {design_cost(lib, design)}")
    print(f"total_error:    {ik.total_error:.6e}")
    print(f"collision_free: {ik.collision_free}")
    if ik.frames_in_collision:
        print(f"frames_in_collision: {ik.frames_in_collision}")
    for i, err in enumerate(ik.per_frame_error):
        print(f"  frame {i:3d}: {err:.6e}")
    return 0


def cmd_fk(args) -> int:
    lib = load_library(_read(args.library))
    design = load_design(_read(args.design))
    validate_design(lib, design)
    q = np.array([float(x) for x in args.q.split(",")]) if args.q else np.zeros(0)
    from .transforms import RigidTransform

    base_pose = (
        RigidTransform.from_dict(json.loads(args.base_pose))
        if args.base_pose
        else RigidTransform.identity()
    )
    frames = forward_kinematics(lib, design, base_pose, q)
    doc = {
        "part_ids": design.part_ids(),
        "frames": [f.to_dict() for f in frames],
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_ik(args) -> int:
    lib, task = _load_inputs(args)
    design = load_design(_read(args.design))
    validate_design(lib, design)
    targets = discretize(task.trajectory)
    ik = solve_ik(
        lib,
        evaluation_design(lib, design),
        task.base_pose,
        targets,
        obstacles=task.obstacles,
        metric=task.metric,
        cfg=task.config.ik,
    )
    print(json.dumps(ik.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_experiment_v(args) -> int:
    lib = load_library(_read(args.library))
    fixtures = Path(args.fixtures)
    pairs = sorted(fixtures.glob("*.design.json"))
    rows = []
    print(f"{'fixture':24s} {'dof_orig':>8s} {'dof_synth':>9s} {'cost':>8s} {'error':>12s} {'seconds':>8s}")
    for design_path in pairs:
        stem = design_path.name[: -len(".design.json")]
        task_path = fixtures / f"{stem}.task.json"
        if not task_path.exists():
            print(f"{stem:24s} missing task file, skipped")
            continue
        try:
            original = load_design(design_path.read_bytes())
            validate_design(lib, original)
            task = load_task(task_path.read_bytes())
            dof_orig = original.dof(lib)
            start = time.perf_counter()
            outcome = synthesize(lib, task)
            elapsed = time.perf_counter() - start
            dof_synth = outcome.design.dof(lib)
            rows.append((stem, dof_orig, dof_synth))
            print(
                f"{stem:24s} {dof_orig:8d} {dof_synth:9d} "
                f"{design_cost(lib, outcome.design):8.2f} "
                f"{outcome.ik.total_error:12.3e} {elapsed:8.2f}"
            )
        except ArmSynthError as exc:
            print(f"{stem:24s} FAILED: {exc}")
    if rows:
        simpler_eq = sum(1 for _, orig, synth in rows if synth <= orig)
        simpler = sum(1 for _, orig, synth in rows if synth < orig)
        print(
            f"summary: {simpler_eq}/{len(rows)} with dof_synth <= dof_orig, "
            f"{simpler}/{len(rows)} strictly simpler"
        )
    return 0


def cmd_serve(args) -> int:  # pragma: no cover - exercised manually
    import uvicorn

    from .service import create_app

    app = create_app(storage_dir=args.storage_dir, job_workers=args.jobs)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="armsynth")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthesize a design for a task")
    synth.add_argument("--library", required=True)
    synth.add_argument("--task", required=True)
    synth.add_argument("--out", required=True)
    synth.add_argument("--trace")
    synth.add_argument("--seed", type=int)
    synth.set_defaults(func=cmd_synth)

    validate = sub.add_parser("validate", help="evaluate a design against a task")
    validate.add_argument("--library", required=True)
    validate.add_argument("--task", required=True)
    validate.add_argument("--design", required=True)
    validate.add_argument("--seed", type=int)
    validate.add_argument("--format", choices=["text", "structured"], default="text")
    validate.set_defaults(func=cmd_validate)

    fk = sub.add_parser("fk", help="print world frames for a design at a pose")
    fk.add_argument("--library", required=True)
    fk.add_argument("--design", required=True)
    fk.add_argument("--q", default="", help="comma-separated joint angles, radians")
    fk.add_argument("--base-pose", dest="base_pose")
    fk.set_defaults(func=cmd_fk)

    ik = sub.add_parser("ik", help="solve joint angles for a design on a task")
    ik.add_argument("--library", required=True)
    ik.add_argument("--task", required=True)
    ik.add_argument("--design", required=True)
    ik.add_argument("--seed", type=int)
    ik.set_defaults(func=cmd_ik)

    exp = sub.add_parser(
        "experiment-v", help="synthesize against trajectories recorded from fixture arms"
    )
    exp.add_argument("--library", required=True)
    exp.add_argument("--fixtures", required=True)
    exp.set_defaults(func=cmd_experiment_v)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8392)
    serve.add_argument("--storage-dir")
    serve.add_argument("--jobs", type=int, default=4)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (ArmSynthError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    if argv is None:  # invoked as a script: translate to process exit code
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
