"""armsynth: automatic synthesis of modular robot arms for trajectory tasks."""

from .config import IkConfig, SynthesisConfig
from .collision import (
    Box,
    Capsule,
    CollisionReport,
    Contact,
    Obstacle,
    Sphere,
    check_pose_collisions,
    primitive_distance,
)
from .errors import (
    ArmSynthError,
    DimensionError,
    IncompatibleRuleError,
    ParseError,
    UnknownIdError,
    ValidationError,
)
from .ik import IkResult, jacobian, residual, solve_ik
from .kinematics import (
    ChainLink,
    Design,
    ErrorMetric,
    MetricKind,
    append_part,
    design_cost,
    forward_kinematics,
    load_design,
    pose_error,
    save_design,
    validate_design,
)
from .library import (
    ConnectionRule,
    JointSpec,
    Part,
    PartKind,
    PartLibrary,
    compatible_rules,
    load_library,
    save_library,
    virtual_attachment_rule,
    virtual_end_effector,
)
from .search import (
    SearchNode,
    SearchTrace,
    SynthesisCancelled,
    SynthesisExhausted,
    SynthesisResult,
    evaluate_heuristic,
    expand,
    synthesize,
)
from .task import (
    ArcTrajectory,
    ExplicitTrajectory,
    HelixTrajectory,
    LineTrajectory,
    Task,
    discretize,
    load_task,
    save_task,
)
from .transforms import RigidTransform

__version__ = "0.1.0"
