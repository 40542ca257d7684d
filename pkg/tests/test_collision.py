import math

import numpy as np
import pytest

from armsynth import (
    Box,
    Capsule,
    Design,
    RigidTransform,
    Sphere,
    Obstacle,
    append_part,
    check_pose_collisions,
    primitive_distance,
)
from armsynth.errors import ValidationError
from armsynth.shapes import _box_sdf_points, transform_primitive

from conftest import load_doc, planar_arm, planar_library_doc

I = RigidTransform.identity()


def test_sphere_sphere_examples():
    a = Sphere((0, 0, 0), 1.0)
    assert primitive_distance(a, Sphere((3, 0, 0), 1.0)) == pytest.approx(1.0, abs=1e-15)
    assert primitive_distance(a, Sphere((1, 0, 0), 1.0)) == pytest.approx(-1.0, abs=1e-15)


def test_capsule_sphere_example():
    cap = Capsule((0, 0, 0), (2, 0, 0), 0.5)
    sph = Sphere((1, 2, 0), 0.5)
    assert primitive_distance(cap, sph) == pytest.approx(1.0, abs=1e-12)


def test_sphere_sphere_exact_formula():
    rng = np.random.default_rng(4)
    for _ in range(200):
        c1, c2 = rng.normal(size=3), rng.normal(size=3)
        r1, r2 = rng.uniform(0.01, 2, 2)
        d = primitive_distance(Sphere(c1, r1), Sphere(c2, r2))
        assert d == float(np.linalg.norm(c1 - c2)) - r1 - r2


def _random_primitive(rng):
    kind = rng.integers(3)
    if kind == 0:
        return Sphere(rng.normal(size=3), rng.uniform(0.05, 1.0))
    if kind == 1:
        return Capsule(rng.normal(size=3), rng.normal(size=3), rng.uniform(0.05, 1.0))
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Box(rng.normal(size=3), rng.uniform(0.05, 1.0, 3), q)


def test_distance_symmetry():
    rng = np.random.default_rng(8)
    for _ in range(300):
        a, b = _random_primitive(rng), _random_primitive(rng)
        assert primitive_distance(a, b) == pytest.approx(primitive_distance(b, a), abs=1e-12)


def test_capsule_capsule_exact():
    a = Capsule((0, 0, 0), (1, 0, 0), 0.25)
    b = Capsule((0, 1, 0), (1, 1, 0), 0.25)
    assert primitive_distance(a, b) == pytest.approx(0.5, abs=1e-12)
    crossing = Capsule((0.5, -1, 0.1), (0.5, 1, 0.1), 0.25)
    assert primitive_distance(a, crossing) == pytest.approx(0.1 - 0.5, abs=1e-12)


def test_box_sphere_cases():
    box = Box((0, 0, 0), (1, 1, 1))
    # face, corner, and containment
    assert primitive_distance(box, Sphere((3, 0, 0), 0.5)) == pytest.approx(1.5, abs=1e-12)
    corner_dist = math.sqrt(3) - 0.25
    assert primitive_distance(box, Sphere((2, 2, 2), 0.25)) == pytest.approx(
        corner_dist, abs=1e-12
    )
    assert primitive_distance(box, Sphere((0, 0, 0), 0.5)) == pytest.approx(-1.5, abs=1e-12)


def test_box_capsule_conservative_against_dense_oracle():
    """Whenever dense sampling finds penetration, the query must agree."""
    rng = np.random.default_rng(123)
    checked = 0
    intersecting = 0
    for _ in range(1000):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        box = Box(rng.normal(size=3) * 0.5, rng.uniform(0.1, 0.8, 3), q)
        cap = Capsule(rng.normal(size=3), rng.normal(size=3), rng.uniform(0.05, 0.5))
        ts = np.linspace(0.0, 1.0, 4096)
        points = cap.endpoint_a + np.outer(ts, cap.endpoint_b - cap.endpoint_a)
        oracle_min = float(np.min(_box_sdf_points(box, points))) - cap.radius
        reported = primitive_distance(cap, box)
        checked += 1
        if oracle_min < 0:  # oracle says intersecting
            intersecting += 1
            assert reported <= 0.0, (oracle_min, reported)
        # the sampled query never overestimates by more than its margin
        assert reported <= oracle_min + 1e-9
    assert checked == 1000
    assert intersecting > 100  # the scene generator produces real overlaps


def test_box_box_gap():
    a = Box((0, 0, 0), (0.5, 0.5, 0.5))
    b = Box((2, 0, 0), (0.5, 0.5, 0.5))
    d = primitive_distance(a, b)
    # true gap 1.0; sampling margin may shave up to half the edge spacing
    assert 0.9 <= d <= 1.0
    overlapping = Box((0.8, 0, 0), (0.5, 0.5, 0.5))
    assert primitive_distance(a, overlapping) < 0


def test_box_box_cross_intersection_detected():
    # plus-sign crossing: intersecting although no corner lies inside
    a = Box((0, 0, 0), (3.0, 0.5, 0.5))
    b = Box((0, 0, 0), (0.5, 3.0, 0.4))
    assert primitive_distance(a, b) <= 0.0


def test_invalid_primitives_rejected():
    with pytest.raises(ValidationError):
        Sphere((0, 0, 0), 0.0)
    with pytest.raises(ValidationError):
        Capsule((0, 0, 0), (1, 0, 0), -0.1)
    with pytest.raises(ValidationError):
        Box((0, 0, 0), (1, 0, 1))


def test_transform_primitive_consistency():
    rng = np.random.default_rng(21)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    frame = RigidTransform(rotation=q, translation=rng.normal(size=3))
    a = Sphere(rng.normal(size=3), 0.3)
    b = Capsule(rng.normal(size=3), rng.normal(size=3), 0.2)
    moved = primitive_distance(transform_primitive(a, frame), transform_primitive(b, frame))
    assert moved == pytest.approx(primitive_distance(a, b), abs=1e-10)


@pytest.fixture
def fat_lib():
    return load_doc(planar_library_doc((1.0,), geometry=0.1))


@pytest.fixture
def fat_arm(fat_lib):
    return planar_arm(fat_lib, (1.0, 1.0))


def test_far_obstacles_empty_report(fat_lib, fat_arm):
    obstacles = [Obstacle("far", Sphere((10, 10, 10), 1.0))]
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, 0.0), obstacles)
    assert report.empty


def test_obstacle_on_tip_reported(fat_lib, fat_arm):
    obstacles = [Obstacle("blob", Sphere((2.0, 0, 0), 0.2))]
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, 0.0), obstacles)
    assert not report.empty
    hit_parts = {c.part_id for c in report.contacts if c.kind == "obstacle"}
    assert "link1" in hit_parts
    assert all(c.other == "blob" for c in report.contacts)


def test_clearance_margin_applies(fat_lib, fat_arm):
    # sphere 3 mm from the straight arm surface: inside the 5 mm margin
    obstacles = [Obstacle("near", Sphere((0.5, 0.203, 0), 0.1))]
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, 0.0), obstacles)
    assert not report.empty
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, 0.0), obstacles, clearance=0.001)
    assert report.empty


def test_folded_arm_self_collision(fat_lib, fat_arm):
    # q = (0, pi): the second link folds back onto the first.
    # Oracle by hand: both capsule axes run (0,0,0)->(1,0,0), r = 0.1 each,
    # so the pair distance is 0 - 0.1 - 0.1 = -0.2.
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, math.pi))
    self_pairs = [c for c in report.contacts if c.kind == "self"]
    assert self_pairs
    pair = {(c.part_index, c.other_index) for c in self_pairs}
    assert (2, 4) in pair  # first link vs second link, two apart in the chain
    worst = min(c.distance for c in self_pairs)
    assert worst == pytest.approx(-0.2, abs=1e-9)


def test_adjacent_parts_never_reported(fat_lib, fat_arm):
    # straight arm: consecutive parts touch at mounts but must not be flagged
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, 0.0))
    for contact in report.contacts:
        if contact.kind == "self":
            assert abs(contact.part_index - contact.other_index) >= 2


def test_straight_arm_no_self_collision(fat_lib, fat_arm):
    report = check_pose_collisions(fat_lib, fat_arm, I, (0.0, 0.0))
    assert report.empty
