"""Battery-aware RRT replanning: RRT, RRT*, ERRT, and dynamic-path RRT."""

from .geom import (
    ArcEdge,
    BackwardTarget,
    DegenerateTarget,
    Pose,
    RobotParams,
    Segment,
    WorldModel,
    arc_between,
    clamp_steer,
    edge_collides,
    is_feasible,
    segments_intersect,
)
from .tree import Forest, NoPath, PathRecord, Tree, TreeNode, UnknownParent
from .planners import (
    PlannerParams,
    PlanResult,
    PlanStatus,
    audit_tree,
    plan_dynamic,
    plan_errt,
    plan_rrt,
    plan_rrt_star,
)
from .energy import (
    BatteryDepleted,
    Decision,
    EnergyParams,
    MissionPlan,
    MissionTrace,
    RobotState,
    Stranded,
    decide_return,
    run_mission,
)

__version__ = "0.1.0"
