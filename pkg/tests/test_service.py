import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from armsynth import RigidTransform, load_design, save_task, synthesize
from armsynth.config import IkConfig, SynthesisConfig
from armsynth.library import load_library
from armsynth.search import event_to_json
from armsynth.service import create_app
from armsynth.task import ExplicitTrajectory, Task, load_task

from conftest import (
    load_doc,
    minimal_library_doc,
    planar_arm,
    planar_library_doc,
    quick_task,
    record_trajectory,
)


@pytest.fixture
def client():
    app = create_app(storage_dir=None, job_workers=2)
    with TestClient(app) as c:
        yield c


def upload_library(client, doc) -> str:
    response = client.post("/api/v1/libraries", content=json.dumps(doc))
    assert response.status_code == 201, response.text
    return response.json()["id"]


def make_task_doc(lib_id: str, trajectory_frames, **config) -> dict:
    task = quick_task(
        ExplicitTrajectory(trajectory_frames),
        library_ref=lib_id,
        config=SynthesisConfig(
            max_parts=config.pop("max_parts", 7),
            seed=config.pop("seed", 0),
            ik=IkConfig(restarts=3, max_iterations_per_frame=120),
            **config,
        ),
    )
    return task.to_dict()


def wait_terminal(client, job_id, timeout=60.0) -> str:
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/api/v1/jobs/{job_id}").json()["state"]
        if state in ("Succeeded", "Failed", "Cancelled"):
            return state
        time.sleep(0.02)
    raise TimeoutError("job did not finish")


def sse_events(client, job_id, cursor=0):
    """Collect (id, data) pairs from the event stream until it closes."""
    collected = []
    with client.stream("GET", f"/api/v1/jobs/{job_id}/events", params={"cursor": cursor}) as r:
        assert r.headers["content-type"].startswith("text/event-stream")
        current_id = None
        for line in r.iter_lines():
            if line.startswith("id: "):
                current_id = int(line[4:])
            elif line.startswith("data: "):
                collected.append((current_id, line[6:]))
    return collected


def test_create_library_and_idempotency(client):
    doc = minimal_library_doc()
    first = upload_library(client, doc)
    second = upload_library(client, doc)
    assert first == second
    listing = client.get("/api/v1/libraries").json()["libraries"]
    assert first in listing
    fetched = client.get(f"/api/v1/libraries/{first}")
    assert fetched.status_code == 200
    assert load_library(json.dumps(fetched.json())).parts.keys() == {"base", "act", "grip"}


def test_create_library_validation_error_names_id(client):
    doc = minimal_library_doc()
    doc["rules"].append({"id": "rx", "parent_part": "act", "child_part": "ghost"})
    response = client.post("/api/v1/libraries", content=json.dumps(doc))
    assert response.status_code == 422
    assert "ghost" in response.json()["detail"]


def test_unknown_library_404(client):
    assert client.get("/api/v1/libraries/lib-nope").status_code == 404


def test_job_lifecycle_and_equivalence(client):
    doc = planar_library_doc((1.0,))
    lib = load_doc(doc)
    lib_id = upload_library(client, doc)
    arm = planar_arm(lib, (1.0, 1.0))
    rng = np.random.default_rng(31)
    poses = [rng.uniform(-1.2, 1.2, 2) for _ in range(3)]
    frames = record_trajectory(lib, arm, poses).frames
    task_doc = make_task_doc(lib_id, frames, seed=5)

    response = client.post("/api/v1/jobs", content=json.dumps(task_doc))
    assert response.status_code == 201
    job_id = response.json()["id"]

    assert wait_terminal(client, job_id) == "Succeeded"
    result = client.get(f"/api/v1/jobs/{job_id}/result").json()
    assert result["state"] == "Succeeded"

    # bitwise equivalence with the in-process search on the same inputs
    task = load_task(json.dumps(task_doc))
    outcome = synthesize(lib, task)
    assert result["design"] == outcome.design.to_dict()
    assert result["ik"]["total_error"] == outcome.ik.total_error
    assert result["ik"]["poses"] == outcome.ik.poses.tolist()

    # stream replay equals the trace, ids are sequential from 0
    events = sse_events(client, job_id)
    assert [i for i, _ in events] == list(range(len(outcome.trace.events)))
    assert [d for _, d in events] == [event_to_json(e) for e in outcome.trace.events]

    # cursor yields exactly the suffix
    suffix = sse_events(client, job_id, cursor=3)
    assert suffix == events[3:]

    # playback data covers every part at every frame
    playback = result["playback"]
    assert playback["part_ids"] == outcome.design.part_ids()
    assert len(playback["frames"]) == len(frames)
    assert all(len(f) == len(playback["part_ids"]) for f in playback["frames"])


def test_result_conflict_while_running(client):
    doc = planar_library_doc((1.0, 0.5))
    lib_id = upload_library(client, doc)
    # unreachable target: the search grinds through the whole frontier
    task_doc = make_task_doc(
        lib_id, [RigidTransform(translation=(50, 0, 0))], max_parts=8
    )
    job_id = client.post("/api/v1/jobs", content=json.dumps(task_doc)).json()["id"]
    response = client.get(f"/api/v1/jobs/{job_id}/result")
    if response.status_code != 409:  # the job may already have finished
        assert response.json()["state"] in ("Failed", "Succeeded")
    state = wait_terminal(client, job_id)
    assert state == "Failed"
    body = client.get(f"/api/v1/jobs/{job_id}/result").json()
    assert body["state"] == "Failed"
    assert body["exhausted"]["reason"] == "frontier_empty"
    assert "incumbent" in body["exhausted"]


def test_cancel_running_job(client):
    doc = planar_library_doc((1.0, 0.5))
    lib_id = upload_library(client, doc)
    task_doc = make_task_doc(
        lib_id, [RigidTransform(translation=(50, 0, 0))], max_parts=10
    )
    job_id = client.post("/api/v1/jobs", content=json.dumps(task_doc)).json()["id"]
    response = client.post(f"/api/v1/jobs/{job_id}/cancel")
    assert response.status_code == 200
    assert wait_terminal(client, job_id) == "Cancelled"
    body = client.get(f"/api/v1/jobs/{job_id}/result").json()
    assert body == {"state": "Cancelled"}


def test_unknown_job_404(client):
    assert client.get("/api/v1/jobs/job-nope").status_code == 404
    assert client.get("/api/v1/jobs/job-nope/result").status_code == 404
    assert client.post("/api/v1/jobs/job-nope/cancel").status_code == 404


def test_job_requires_known_library(client):
    task_doc = make_task_doc("lib-missing", [RigidTransform(translation=(1, 0, 0))])
    response = client.post("/api/v1/jobs", content=json.dumps(task_doc))
    assert response.status_code == 404


def test_validate_design_roundtrip(client):
    doc = planar_library_doc((1.0,))
    lib = load_doc(doc)
    lib_id = upload_library(client, doc)
    arm = planar_arm(lib, (1.0, 1.0))
    rng = np.random.default_rng(37)
    poses = [rng.uniform(-1.5, 1.5, 2) for _ in range(4)]
    task_doc = make_task_doc(lib_id, record_trajectory(lib, arm, poses).frames)
    body = {"task": task_doc, "design": arm.to_dict()}
    response = client.post("/api/v1/validate", content=json.dumps(body))
    assert response.status_code == 200
    result = response.json()
    assert result["ik"]["total_error"] <= 1e-6
    assert result["dof"] == 2
    assert len(result["playback"]["frames"]) == 4


def test_validate_rejects_wrong_parent_rule(client):
    doc = planar_library_doc((1.0,))
    lib_id = upload_library(client, doc)
    task_doc = make_task_doc(lib_id, [RigidTransform(translation=(1, 0, 0))])
    bad_design = {
        "format": "armdesign/1",
        "base": "base",
        "links": [{"part": "grip", "rule": "r-link1-grip"}],
    }
    response = client.post(
        "/api/v1/validate", content=json.dumps({"task": task_doc, "design": bad_design})
    )
    assert response.status_code == 422


def test_compatible_parts_endpoint(client):
    doc = planar_library_doc((1.0,))
    lib = load_doc(doc)
    lib_id = upload_library(client, doc)

    base_only = {"format": "armdesign/1", "base": "base", "links": []}
    response = client.post(
        f"/api/v1/libraries/{lib_id}/compatible-parts", content=json.dumps(base_only)
    )
    assert response.status_code == 200
    assert [r["id"] for r in response.json()["rules"]] == ["r-base-act"]

    finished = planar_arm(lib, (1.0,)).to_dict()
    response = client.post(
        f"/api/v1/libraries/{lib_id}/compatible-parts", content=json.dumps(finished)
    )
    assert response.json()["rules"] == []


def test_storage_dir_persists_libraries(tmp_path):
    doc = minimal_library_doc()
    app = create_app(storage_dir=str(tmp_path))
    with TestClient(app) as client:
        lib_id = upload_library(client, doc)
    assert (tmp_path / "libraries" / f"{lib_id}.json").exists()
    # a fresh app over the same directory still serves the blob
    app2 = create_app(storage_dir=str(tmp_path))
    with TestClient(app2) as client:
        assert client.get(f"/api/v1/libraries/{lib_id}").status_code == 200
