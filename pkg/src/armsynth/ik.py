"""Per-frame inverse kinematics over a discretized trajectory.

Each target frame is solved independently by damped least squares on the
analytic Jacobian of the metric residual, warm-started from the previous
frame and retried from seeded random in-limit poses. Joint limits are
enforced by clamping after every step. Frames whose best pose still collides
are penalized rather than rejected, so the value remains usable as a search
heuristic; the synthesis goal test separately requires collision freedom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import DEFAULT_CLEARANCE, Obstacle, check_frame_collisions
from .config import IkConfig
from .errors import DimensionError
from .kinematics import (
    ChainState,
    Design,
    ErrorMetric,
    KinematicChain,
    MetricKind,
    residual_between,
)
from .library import PartLibrary
from .transforms import (
    RigidTransform,
    quat_conjugate,
    quat_from_matrix,
    quat_log,
    quat_multiply,
    quat_to_matrix,
    so3_left_jacobian_inverse,
)

COLLISION_PENALTY = 10.0  # m², added per colliding frame
_CONVERGED_ERROR = 1e-12  # m²; below this, remaining restarts are skipped
_MAX_LAMBDA = 1e10
_MAX_STEP = 0.5  # rad, per-joint per-iteration cap; keeps descent on-path


@dataclass
class IkResult:
    """Outcome of tracking one target list with one design."""

    total_error: float
    per_frame_error: list[float]
    poses: np.ndarray  # (n_frames, dof)
    collision_free: bool
    frames_in_collision: list[int]

    def to_dict(self) -> dict:
        return {
            "total_error": self.total_error,
            "per_frame_error": list(self.per_frame_error),
            "poses": self.poses.tolist(),
            "collision_free": self.collision_free,
            "frames_in_collision": list(self.frames_in_collision),
        }


def _residual_state(
    state: ChainState, target: RigidTransform, metric: ErrorMetric
) -> np.ndarray:
    pos = state.tool_t - target.translation
    if metric.kind is MetricKind.POSITION_ONLY:
        return pos
    sw = np.sqrt(metric.w_rot)
    if metric.kind is MetricKind.POSITION_AND_AXIS:
        axis = np.asarray(metric.axis, dtype=float)
        u = state.tool_R @ axis
        v = target.rotate(axis)
        cross = np.cross(u, v)
        angle = float(np.arctan2(np.linalg.norm(cross), float(u @ v)))
        return np.concatenate([pos, [sw * angle]])
    q_actual = quat_from_matrix(state.tool_R)
    rel = quat_multiply(quat_conjugate(target.rotation), q_actual)
    return np.concatenate([pos, sw * quat_log(rel)])


def _jacobian_state(
    state: ChainState, target: RigidTransform | None, metric: ErrorMetric, dof: int
) -> np.ndarray:
    """Analytic derivative of the metric residual w.r.t. joint angles.

    Position rows of column k are axis_k × (tool_point − joint_origin_k).
    """
    J = np.zeros((metric.residual_dim, dof))
    if dof == 0:
        return J
    arms = state.tool_t - state.joint_origins  # (dof, 3)
    J[:3, :] = np.cross(state.joint_axes, arms).T
    if metric.kind is MetricKind.POSITION_ONLY:
        return J
    if target is None:
        raise DimensionError("rotational metrics need a target frame for the Jacobian")
    sw = np.sqrt(metric.w_rot)
    if metric.kind is MetricKind.POSITION_AND_AXIS:
        axis = np.asarray(metric.axis, dtype=float)
        u = state.tool_R @ axis
        v = target.rotate(axis)
        cross = np.cross(u, v)
        sin_theta = float(np.linalg.norm(cross))
        if sin_theta > 1e-9:
            J[3, :] = -sw * (state.joint_axes @ cross) / sin_theta
        return J
    q_actual = quat_from_matrix(state.tool_R)
    rel = quat_multiply(quat_conjugate(target.rotation), q_actual)
    omega = quat_log(rel)
    jl_inv = so3_left_jacobian_inverse(omega)
    r_target = quat_to_matrix(target.rotation)
    J[3:, :] = sw * (jl_inv @ (r_target.T @ state.joint_axes.T))
    return J


def residual(
    lib: PartLibrary,
    design: Design,
    base_pose: RigidTransform,
    q,
    target: RigidTransform,
    metric: ErrorMetric,
) -> np.ndarray:
    """Error-space residual of the design's tool frame against a target."""
    chain = KinematicChain(lib, design, base_pose)
    return _residual_state(chain.evaluate(q), target, metric)


def jacobian(
    lib: PartLibrary,
    design: Design,
    base_pose: RigidTransform,
    q,
    metric: ErrorMetric,
    target: RigidTransform | None = None,
) -> np.ndarray:
    """Residual Jacobian, shape (error-space dim, DOF). The target frame is
    required for metrics with a rotational term and ignored otherwise."""
    chain = KinematicChain(lib, design, base_pose)
    return _jacobian_state(chain.evaluate(q), target, metric, chain.dof)


def _damped_least_squares(
    chain: KinematicChain,
    target: RigidTransform,
    metric: ErrorMetric,
    q0: np.ndarray,
    cfg: IkConfig,
    accepted_errors: list[float] | None = None,
) -> tuple[np.ndarray, float]:
    """Levenberg-Marquardt flavored DLS; the error of accepted iterates is
    non-increasing by construction."""
    q = np.clip(q0, chain.lower, chain.upper)
    state = chain.evaluate(q)
    r = _residual_state(state, target, metric)
    error = float(r @ r)
    if accepted_errors is not None:
        accepted_errors.append(error)
    if chain.dof == 0:
        return q, error
    lam = cfg.damping
    eye = np.eye(chain.dof)
    for _ in range(cfg.max_iterations_per_frame):
        if error < 1e-18:
            break
        J = _jacobian_state(state, target, metric, chain.dof)
        g = J.T @ r
        H = J.T @ J
        accepted = False
        while lam <= _MAX_LAMBDA:
            dq = np.linalg.solve(H + lam * eye, -g)
            biggest = float(np.max(np.abs(dq)))
            if biggest > _MAX_STEP:
                dq *= _MAX_STEP / biggest
            q_new = np.clip(q + dq, chain.lower, chain.upper)
            state_new = chain.evaluate(q_new)
            r_new = _residual_state(state_new, target, metric)
            error_new = float(r_new @ r_new)
            if error_new < error:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break  # stalled at a local minimum or joint limit
        improvement = error - error_new
        q, state, r, error = q_new, state_new, r_new, error_new
        if accepted_errors is not None:
            accepted_errors.append(error)
        lam = max(lam / 3.0, 1e-12)
        if improvement < cfg.convergence_tolerance:
            break
    return q, error


def solve_ik(
    lib: PartLibrary,
    design: Design,
    base_pose: RigidTransform,
    targets: list[RigidTransform],
    obstacles: tuple[Obstacle, ...] | list[Obstacle] = (),
    metric: ErrorMetric = ErrorMetric(),
    cfg: IkConfig = IkConfig(),
    *,
    seed_poses: np.ndarray | None = None,
    clearance: float = DEFAULT_CLEARANCE,
) -> IkResult:
    """Track ``targets`` frame by frame, minimizing the metric residual.

    ``seed_poses`` (n_frames × dof) adds one extra deterministic start per
    frame, ahead of the random restarts. Output is deterministic for fixed
    inputs and ``cfg.seed``: the winning restart is the lowest-error one,
    ties broken by lowest restart index.
    """
    if not targets:
        raise DimensionError("targets must be nonempty")
    chain = KinematicChain(lib, design, base_pose)
    if seed_poses is not None:
        seed_poses = np.asarray(seed_poses, dtype=float)
        if seed_poses.shape != (len(targets), chain.dof):
            raise DimensionError(
                f"seed_poses shape {seed_poses.shape} does not match "
                f"({len(targets)}, {chain.dof})"
            )
    rng = np.random.default_rng(cfg.seed)
    zero = np.clip(np.zeros(chain.dof), chain.lower, chain.upper)
    needs_check = bool(obstacles) or any(
        lib.part(pid).collision_geometry for pid in design.part_ids()
    )

    def screen(q) -> bool:
        """True when the pose collides. Folding the penalty into restart
        selection (rather than only screening the winner) lets a clean
        restart beat an infinitesimally-better colliding one."""
        if not needs_check:
            return False
        frames = chain.part_frames(q)
        return not check_frame_collisions(lib, design, frames, obstacles, clearance).empty

    poses = np.zeros((len(targets), chain.dof))
    per_frame: list[float] = []
    frames_in_collision: list[int] = []
    warm = zero
    for i, target in enumerate(targets):
        starts = [warm]
        if seed_poses is not None:
            starts.append(seed_poses[i])
        best_q, best_error, best_collides = None, np.inf, False
        attempt = 0
        while attempt < len(starts) + (cfg.restarts if chain.dof > 0 else 0):
            if attempt < len(starts):
                q0 = starts[attempt]
            else:
                q0 = rng.uniform(chain.lower, chain.upper)
            q_sol, raw = _damped_least_squares(chain, target, metric, q0, cfg)
            collides = screen(q_sol)
            err = max(raw, COLLISION_PENALTY) if collides else raw
            if err < best_error:
                best_q, best_error, best_collides = q_sol, err, collides
            if best_error <= _CONVERGED_ERROR:
                break
            attempt += 1
        poses[i] = best_q
        per_frame.append(best_error)
        if best_collides:
            frames_in_collision.append(i)
        warm = best_q

    return IkResult(
        total_error=float(sum(per_frame)),
        per_frame_error=per_frame,
        poses=poses,
        collision_free=not frames_in_collision,
        frames_in_collision=frames_in_collision,
    )
