"""HTTP service: libraries, synthesis jobs with live progress, validation.

Endpoints live under /api/v1. Libraries and tasks are content-addressed
blobs (kept on disk when a storage directory is configured); jobs are held
in memory and stream their search trace over server-sent events with
replayable cursors.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from .errors import ArmSynthError, ParseError, UnknownIdError, ValidationError
from .ik import solve_ik
from .kinematics import Design, load_design, validate_design
from .library import PartLibrary, compatible_rules, load_library
from .report import build_result_document
from .search import (
    SynthesisCancelled,
    SynthesisExhausted,
    evaluation_design,
    event_to_json,
    synthesize,
)
from .task import Task, discretize, load_task

API_PREFIX = "/api/v1"
_EVENT_POLL_SECONDS = 0.2


def content_id(doc: dict, prefix: str) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return f"{prefix}-{hashlib.sha256(canonical.encode()).hexdigest()[:16]}"


@dataclass
class Job:
    id: str
    library_id: str
    task: Task
    state: str = "Queued"  # Queued | Running | Succeeded | Failed | Cancelled
    events: list[str] = field(default_factory=list)
    result: dict | None = None
    failure: dict | None = None
    cancel_requested: bool = False
    cond: threading.Condition = field(default_factory=threading.Condition)

    def terminal(self) -> bool:
        return self.state in ("Succeeded", "Failed", "Cancelled")


class BlobStore:
    """Content-addressed JSON documents, optionally persisted to disk."""

    def __init__(self, root: Path | None, kind: str):
        self._root = root / kind if root is not None else None
        self._memory: dict[str, dict] = {}
        if self._root is not None:
            self._root.mkdir(parents=True, exist_ok=True)
            for path in self._root.glob("*.json"):
                self._memory[path.stem] = json.loads(path.read_text())

    def put(self, doc: dict, prefix: str) -> str:
        blob_id = content_id(doc, prefix)
        if blob_id not in self._memory:
            self._memory[blob_id] = doc
            if self._root is not None:
                (self._root / f"{blob_id}.json").write_text(
                    json.dumps(doc, sort_keys=True, indent=2) + "\n"
                )
        return blob_id

    def get(self, blob_id: str) -> dict | None:
        return self._memory.get(blob_id)

    def ids(self) -> list[str]:
        return sorted(self._memory)


def create_app(storage_dir: str | None = None, job_workers: int = 4) -> FastAPI:
    app = FastAPI(title="armsynth service")
    root = Path(storage_dir) if storage_dir else None
    libraries = BlobStore(root, "libraries")
    tasks = BlobStore(root, "tasks")
    jobs: dict[str, Job] = {}
    jobs_lock = threading.Lock()
    worker_slots = threading.Semaphore(job_workers)

    try:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )
    except ImportError:  # pragma: no cover
        pass

    def error_response(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    def resolve_library(library_id: str) -> PartLibrary | None:
        doc = libraries.get(library_id)
        if doc is None:
            return None
        return load_library(json.dumps(doc))

    @app.exception_handler(ArmSynthError)
    async def _domain_error(request: Request, exc: ArmSynthError):
        status = 422 if isinstance(exc, (ParseError, ValidationError)) else 400
        if isinstance(exc, UnknownIdError):
            status = 404
        return error_response(status, str(exc))

    @app.post(f"{API_PREFIX}/libraries", status_code=201)
    async def create_library(request: Request):
        body = await request.body()
        lib = load_library(body)  # validates; 422 via exception handler
        library_id = libraries.put(lib.to_dict(), "lib")
        return {"id": library_id}

    @app.get(f"{API_PREFIX}/libraries")
    async def list_libraries():
        return {"libraries": libraries.ids()}

    @app.get(f"{API_PREFIX}/libraries/{{library_id}}")
    async def get_library(library_id: str):
        doc = libraries.get(library_id)
        if doc is None:
            return error_response(404, f"unknown library {library_id!r}")
        return doc

    @app.post(f"{API_PREFIX}/libraries/{{library_id}}/compatible-parts")
    async def compatible_parts(library_id: str, request: Request):
        lib = resolve_library(library_id)
        if lib is None:
            return error_response(404, f"unknown library {library_id!r}")
        design = load_design(await request.body())
        validate_design(lib, design)
        rules = compatible_rules(lib, design.tip_id())
        return {"rules": [r.to_dict() for r in rules]}

    def run_job(job: Job) -> None:
        with worker_slots:
            with job.cond:
                if job.cancel_requested:
                    job.state = "Cancelled"
                    job.cond.notify_all()
                    return
                job.state = "Running"
                job.cond.notify_all()
            lib = resolve_library(job.library_id)

            def on_event(event) -> None:
                line = event_to_json(event)
                with job.cond:
                    job.events.append(line)
                    job.cond.notify_all()

            def should_stop() -> bool:
                return job.cancel_requested

            try:
                outcome = synthesize(lib, job.task, on_event=on_event, should_stop=should_stop)
                result = build_result_document(lib, outcome.design, job.task, outcome.ik)
                result["trace_length"] = len(outcome.trace.events)
                with job.cond:
                    job.result = result
                    job.state = "Succeeded"
                    job.cond.notify_all()
            except SynthesisCancelled:
                with job.cond:
                    job.state = "Cancelled"
                    job.cond.notify_all()
            except SynthesisExhausted as exc:
                failure = {"reason": exc.reason}
                if exc.incumbent is not None:
                    failure["incumbent"] = exc.incumbent.to_dict()
                if exc.incumbent_ik is not None:
                    failure["incumbent_ik"] = exc.incumbent_ik.to_dict()
                with job.cond:
                    job.failure = failure
                    job.state = "Failed"
                    job.cond.notify_all()
            except Exception as exc:  # defensive: surface as job failure
                with job.cond:
                    job.failure = {"reason": "error", "message": str(exc)}
                    job.state = "Failed"
                    job.cond.notify_all()

    @app.post(f"{API_PREFIX}/jobs", status_code=201)
    async def start_synthesis(request: Request):
        body = await request.body()
        task = load_task(body)
        if task.library_ref is None:
            return error_response(422, "task must carry a 'library_ref' naming an uploaded library")
        lib = resolve_library(task.library_ref)
        if lib is None:
            return error_response(404, f"unknown library {task.library_ref!r}")
        task.validate_against(lib)
        tasks.put(task.to_dict(), "task")
        job = Job(id=f"job-{uuid.uuid4().hex[:12]}", library_id=task.library_ref, task=task)
        with jobs_lock:
            jobs[job.id] = job
        threading.Thread(target=run_job, args=(job,), daemon=True).start()
        return {"id": job.id}

    def get_job(job_id: str) -> Job | None:
        with jobs_lock:
            return jobs.get(job_id)

    @app.get(f"{API_PREFIX}/jobs/{{job_id}}")
    async def job_status(job_id: str):
        job = get_job(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id!r}")
        with job.cond:
            return {"id": job.id, "state": job.state, "events": len(job.events)}

    @app.post(f"{API_PREFIX}/jobs/{{job_id}}/cancel")
    async def cancel_job(job_id: str):
        job = get_job(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id!r}")
        with job.cond:
            job.cancel_requested = True
            if job.state == "Queued":
                job.state = "Cancelled"
            job.cond.notify_all()
            return {"id": job.id, "state": job.state}

    @app.get(f"{API_PREFIX}/jobs/{{job_id}}/result")
    async def job_result(job_id: str):
        job = get_job(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id!r}")
        with job.cond:
            if job.state in ("Queued", "Running"):
                return error_response(409, f"job {job_id} is {job.state}")
            if job.state == "Succeeded":
                return {"state": job.state, **job.result}
            if job.state == "Failed":
                return {"state": job.state, "exhausted": job.failure}
            return {"state": job.state}

    @app.get(f"{API_PREFIX}/jobs/{{job_id}}/events")
    async def stream_events(job_id: str, cursor: int = 0):
        job = get_job(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id!r}")

        def generate():
            index = max(0, cursor)
            while True:
                with job.cond:
                    while index >= len(job.events) and not job.terminal():
                        job.cond.wait(timeout=_EVENT_POLL_SECONDS)
                    batch = job.events[index:]
                    done = job.terminal() and index + len(batch) >= len(job.events)
                for line in batch:
                    yield f"id: {index}\ndata: {line}\n\n"
                    index += 1
                if done:
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post(f"{API_PREFIX}/validate")
    async def validate(request: Request):
        body = json.loads(await request.body())
        if not isinstance(body, dict) or not {"task", "design"} <= set(body):
            return error_response(422, "body must contain 'task' and 'design' documents")
        if "library" in body:
            lib = load_library(json.dumps(body["library"]))
        else:
            task_doc = body["task"]
            ref = task_doc.get("library_ref")
            lib = resolve_library(ref) if ref else None
            if lib is None:
                return error_response(404, f"unknown library {ref!r}")
        task = load_task(json.dumps(body["task"]))
        design = load_design(json.dumps(body["design"]))
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
        return build_result_document(lib, design, task, ik)

    return app


def main(argv=None) -> None:  # pragma: no cover - thin wrapper
    import argparse
    import os

    import uvicorn

    parser = argparse.ArgumentParser(description="armsynth HTTP service")
    parser.add_argument("--host", default=os.environ.get("ARMSYNTH_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("ARMSYNTH_PORT", "8392")))
    parser.add_argument(
        "--storage-dir", default=os.environ.get("ARMSYNTH_STORAGE", None)
    )
    parser.add_argument(
        "--jobs", type=int, default=int(os.environ.get("ARMSYNTH_JOBS", "4"))
    )
    args = parser.parse_args(argv)
    app = create_app(storage_dir=args.storage_dir, job_workers=args.jobs)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":  # pragma: no cover
    main()
