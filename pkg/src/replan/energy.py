"""Battery model, return-to-base decision policy, and the mission executor.

The robot follows its task path at fixed speed while a return path to a
charging station is maintained every tick. When the cached return path's
energy exceeds safety_factor x battery, an RRT* fallback (and then the
other stations) are tried; if nothing fits the budget the robot commits to
the cheapest battery-feasible return path.
"""

import bisect
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .geom import (
    BackwardTarget,
    DegenerateTarget,
    Point,
    Pose,
    RobotParams,
    WorldModel,
    arc_between,
    clamp_steer,
    constant_omega_pose,
    is_feasible,
    _polyline_hits_segments,
)
from .planners import PlannerParams, PlanStatus, plan_dynamic, plan_rrt_star
from .tree import Forest, PathRecord

# Waypoints of planner routes are densely spaced (one steer step apart), so
# the follower steers at a fixed lookahead: it always pursues the first
# route waypoint at least this far ahead. Chasing each waypoint exactly is
# ill-conditioned — the curvature needed to hit a point scales with 1 /
# distance, so a micrometre of drift next to a waypoint demands impossible
# steering and the follower ends up orbiting it.
ROUTE_LOOKAHEAD = 0.3

# Capture radius for consuming route waypoints the robot passes over.
ROUTE_WP_EPS = 1e-3

# Arc feasibility tolerance while following; absorbs round-off in the
# recomputed steering rate.
FOLLOW_OMEGA_TOL = 1e-6

# Task-path corners are rounded at the minimum turn radius: while the target
# bearing is further off heading than this, the follower turns at the
# steering limit instead of committing to a wide tangent arc. A single arc
# to a target nearly 90 degrees off heading bulges far off the task line
# (and, worse, can sweep the robot past a charging station with a heading
# from which the station becomes expensive to reach).
FOLLOW_ALPHA_MAX = math.pi / 6


class Stranded(RuntimeError):
    """No station is reachable within the remaining battery."""


class BatteryDepleted(RuntimeError):
    """Battery would go negative; indicates a policy failure."""


@dataclass
class RobotState:
    pose: Pose
    battery: float
    params: RobotParams


@dataclass(frozen=True)
class EnergyParams:
    battery_capacity: float
    safety_factor: float = 0.8
    replan_period: int = 1
    dt: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.safety_factor < 1.0:
            raise ValueError("safety_factor must be in (0, 1)")
        if self.battery_capacity <= 0.0:
            raise ValueError("battery_capacity must be > 0")
        if self.replan_period < 1:
            raise ValueError("replan_period must be >= 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")


@dataclass
class MissionPlan:
    world: WorldModel
    robot: RobotParams
    start: Pose
    task_path: List[Point]
    stations: List[Point]
    forest_capacity: int = 5
    target_station: int = -1  # -1: nearest station to the start
    forests: Dict[int, Forest] = field(default_factory=dict)

    def __post_init__(self):
        if not self.stations:
            raise ValueError("at least one charging station is required")
        for wp in self.task_path:
            if not self.world.contains(wp):
                raise ValueError(f"task waypoint {wp} outside workspace")
        for i in range(len(self.stations)):
            self.forests.setdefault(i, Forest(self.forest_capacity))
        if self.target_station < 0:
            self.target_station = min(
                range(len(self.stations)),
                key=lambda i: self.start.distance_to(self.stations[i]),
            )

    def fresh_copy(self) -> "MissionPlan":
        """An independent copy with empty forests, for running the same
        mission under several seeds without sharing warm-start state."""
        return MissionPlan(self.world, self.robot, self.start,
                           list(self.task_path), list(self.stations),
                           self.forest_capacity)


@dataclass
class Decision:
    kind: str  # "continue" | "return"
    path: PathRecord
    station: int
    planner_used: str  # "dynamic" | "rrt_star"
    replan_ms: float = 0.0


@dataclass
class TraceRow:
    t: float
    x: float
    y: float
    heading: float
    battery: float
    decision: str  # "continue" | "return" | "resume"
    station: int
    path_cost: float
    planner: str
    replan_ms: float


@dataclass
class MissionTrace:
    rows: List[TraceRow] = field(default_factory=list)
    completed: bool = False
    recharges: int = 0
    station_switches: int = 0

    @property
    def min_battery(self) -> float:
        return min(r.battery for r in self.rows) if self.rows else math.nan

    @property
    def return_events(self) -> int:
        n = 0
        prev = "continue"
        for r in self.rows:
            if r.decision == "return" and prev != "return":
                n += 1
            prev = r.decision
        return n


def _plan_to_station(state: RobotState, mission: MissionPlan, station: int,
                     pparams: PlannerParams) -> Tuple[object, str]:
    """Dynamic plan to a station; the very first plan per station bootstraps
    with pure RRT* (rewired) and seeds that station's forest."""
    goal = mission.stations[station]
    forest = mission.forests[station]
    if len(forest) == 0:
        res = plan_rrt_star(state.pose, goal, mission.world, mission.robot,
                            pparams)
        if res.status is PlanStatus.FOUND:
            res = replace(res, path=smooth_route(res.path, mission.world,
                                                 mission.robot,
                                                 mission.world.k))
            forest.push(res.path)
        return res, "rrt_star"
    res = plan_dynamic(state.pose, goal, mission.world, mission.robot,
                       pparams, forest)
    if res.status is PlanStatus.FOUND:
        res = replace(res, path=smooth_route(res.path, mission.world,
                                             mission.robot, mission.world.k))
    return res, "dynamic"


def decide_return(state: RobotState, mission: MissionPlan,
                  eparams: EnergyParams, pparams: PlannerParams) -> Decision:
    """Return-to-base policy.

    Tries the current target station with the dynamic planner; if the path
    exceeds safety_factor x battery, retries with budgeted RRT*, then the
    remaining stations in ascending distance. When no station fits the
    budget, commits to the cheapest path that the battery can still cover.
    """
    if state.battery <= 0.0:
        raise BatteryDepleted("decide_return called with empty battery")
    t0 = time.perf_counter()
    budget = eparams.safety_factor * state.battery

    order = [mission.target_station] + sorted(
        (i for i in range(len(mission.stations)) if i != mission.target_station),
        key=lambda i: (state.pose.distance_to(mission.stations[i]), i),
    )

    candidates: List[Tuple[float, PathRecord, int, str]] = []
    seed = pparams.rng_seed
    for station in order:
        res, planner = _plan_to_station(state, mission, station,
                                        replace(pparams, rng_seed=seed))
        seed += 1
        if res.status is PlanStatus.FOUND:
            candidates.append((res.path.cost, res.path, station, planner))
            if res.path.cost <= budget:
                mission.target_station = station
                return Decision("continue", res.path, station, planner,
                                (time.perf_counter() - t0) * 1e3)
        star = plan_rrt_star(state.pose, mission.stations[station],
                             mission.world, mission.robot,
                             replace(pparams, rng_seed=seed), budget=budget)
        seed += 1
        if star.status is PlanStatus.FOUND:
            star = replace(star, path=smooth_route(star.path, mission.world,
                                                   mission.robot,
                                                   mission.world.k))
            candidates.append((star.path.cost, star.path, station, "rrt_star"))
            if star.path.cost <= budget:
                mission.forests[station].push(star.path)
                mission.target_station = station
                return Decision("continue", star.path, station, "rrt_star",
                                (time.perf_counter() - t0) * 1e3)

    feasible = [c for c in candidates if c[0] <= state.battery]
    if not feasible:
        raise Stranded(
            f"no station reachable with battery {state.battery:.3f}")
    cost, path, station, planner = min(feasible, key=lambda c: (c[0], c[2]))
    mission.target_station = station
    return Decision("return", path, station, planner,
                    (time.perf_counter() - t0) * 1e3)


# Rollout granularity and waypoint-capture radius for route smoothing.
SHORTCUT_STEP = 0.05
SHORTCUT_EPS = 0.02


def _simulate_to(pose: Pose, target: Point, robot: RobotParams,
                 max_len: float,
                 turn_sign: Optional[float] = None
                 ) -> Optional[Tuple[List[Pose], List[float]]]:
    """Roll the steering follower toward `target` in SHORTCUT_STEP increments.

    Uses the same primitive as route execution: the exact tangent arc when
    it is gentle enough, a steering-limit turn otherwise. `turn_sign`
    forces the initial steering-limit turn direction (+1 left, -1 right)
    until the target is nearly ahead — the shorter turn is not always the
    usable one next to a workspace wall. Returns the visited poses and
    per-step arc lengths, or None when `target` is not captured within
    `max_len` of travel (e.g. it lies inside the minimum turning circle
    and the rollout would orbit it).
    """
    poses: List[Pose] = []
    steps: List[float] = []
    length = 0.0
    forced = turn_sign
    while pose.distance_to(target) > SHORTCUT_EPS:
        if length >= max_len:
            return None
        bearing = math.atan2(target[1] - pose.y, target[0] - pose.x)
        alpha = math.remainder(bearing - pose.heading, math.tau)
        if forced is not None and abs(alpha) <= FOLLOW_ALPHA_MAX:
            forced = None
        d = SHORTCUT_STEP
        if forced is not None:
            pose = constant_omega_pose(pose, forced * robot.omega_max,
                                       robot.speed, SHORTCUT_STEP)
        else:
            try:
                cand = arc_between(pose, target, robot, 1.0)
                if (is_feasible(cand, robot, tol=FOLLOW_OMEGA_TOL)
                        and abs(cand.alpha) <= FOLLOW_ALPHA_MAX):
                    if cand.length <= SHORTCUT_STEP:
                        pose, d = cand.end_pose, cand.length
                    else:
                        pose = constant_omega_pose(pose, cand.omega,
                                                   robot.speed, SHORTCUT_STEP)
                else:
                    pose = clamp_steer(pose, target, robot, SHORTCUT_STEP)
            except DegenerateTarget:
                break
            except BackwardTarget:
                pose = clamp_steer(pose, target, robot, SHORTCUT_STEP)
        poses.append(pose)
        steps.append(d)
        length += d
    return poses, steps


def _route_collides(pts: List[Point], world: WorldModel) -> bool:
    a = np.asarray(pts)
    eps = 1e-12
    out = ((a[:, 0] < world.xmin - eps) | (a[:, 0] > world.xmax + eps)
           | (a[:, 1] < world.ymin - eps) | (a[:, 1] > world.ymax + eps))
    if out.any():
        return True
    return _polyline_hits_segments(a, world.obstacle_array())


def _shortcut(start: Pose, targets: List[Point], world: WorldModel,
              robot: RobotParams, k: float,
              created_at: int = 0) -> Optional[PathRecord]:
    """Drive through `targets` with the follower primitive, greedily skipping
    ahead to the farthest target capturable without leaving the workspace or
    crossing an obstacle (halving the horizon on failure). Returns None when
    some hop cannot be completed."""
    m = len(targets)
    pose = start
    out_poses = [pose]
    out_costs = [0.0]
    turn_radius = robot.speed / robot.omega_max
    i = 0
    while i < m - 1:
        j = m - 1
        hop = None
        while True:
            horizon = (pose.distance_to(targets[j])
                       + 2.0 * math.pi * turn_radius + 0.5)
            for sign in (None, 1.0, -1.0):
                sim = _simulate_to(pose, targets[j], robot, horizon, sign)
                if sim is None:
                    continue
                pts = [pose.position] + [q.position for q in sim[0]]
                if not _route_collides(pts, world):
                    hop = sim
                    break
            if hop is not None or j == i + 1:
                break
            j = i + max(1, (j - i) // 2)
        if hop is None:
            return None
        for q, d in zip(*hop):
            out_poses.append(q)
            out_costs.append(out_costs[-1] + k * d)
        pose = out_poses[-1]
        i = j
    return PathRecord(tuple(out_poses), tuple(out_costs),
                      created_at=created_at)


def smooth_route(path: PathRecord, world: WorldModel, robot: RobotParams,
                 k: float) -> PathRecord:
    """Rebuild a planned route as the follower will actually drive it.

    Sampling-based routes can wander (the planners stop at their first
    goal-region hit, so paths from an awkward heading can loop far off the
    direct maneuver); the greedy shortcut collapses them to near the
    minimal steering-limited maneuver, and the rebuilt cost is what
    executing the route will drain. Returns the original path unchanged if
    a shortcut cannot be completed or is no cheaper.
    """
    smoothed = _shortcut(path.poses[0], [p.position for p in path.poses],
                         world, robot, k, created_at=path.created_at)
    if smoothed is None or smoothed.cost >= path.cost:
        return path
    return smoothed


def _pose_along(path: PathRecord, lens: List[float], s: float) -> Pose:
    """Pose at arc length `s` along a densely sampled path (linear
    interpolation between consecutive poses; `lens` is the cumulative
    arc-length table for the path)."""
    j = bisect.bisect_left(lens, s)
    if j <= 0:
        return path.poses[0]
    if j >= len(lens):
        return path.poses[-1]
    a, b = path.poses[j - 1], path.poses[j]
    span = lens[j] - lens[j - 1]
    f = (s - lens[j - 1]) / span if span > 0.0 else 1.0
    return Pose(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y),
                a.heading + f * math.remainder(b.heading - a.heading,
                                               math.tau))


def _retrace_targets(pose: Pose, trail: List[Point],
                     final: Point) -> List[Point]:
    """Waypoint list retracing `trail` in reverse from `pose` to `final`,
    thinned to one point per follower step."""
    targets = [pose.position]
    for p in reversed(trail):
        if math.hypot(p[0] - targets[-1][0],
                      p[1] - targets[-1][1]) >= SHORTCUT_STEP:
            targets.append(p)
    targets.append(final)
    return targets


def _hold_cost(path: PathRecord, pose: Pose, robot: RobotParams,
               k: float) -> float:
    """Cost of executing a previously planned path from the current pose.

    The hop onto the path charges the straight-line distance plus a
    minimum-turning-radius arc for however far the join point is off the
    robot's heading: without that term a path left behind the robot looks
    almost free even though reaching it needs a turnaround. The path may
    be entered at its start, or at an interior waypoint within the
    follower's lookahead capture radius (the follower skips waypoints that
    near when executing, so a robot a fraction of a step past the start is
    not charged a turnaround to revisit it). Distant interior joins stay
    forbidden: valuing them by straight-line hops undervalues the path.
    The estimate grows continuously as the robot moves on, so a held path
    decays instead of flipping on one noisy replan.
    """
    return _best_join(path, pose, robot, k)[0]


def _best_join(path: PathRecord, pose: Pose, robot: RobotParams,
               k: float) -> Tuple[float, int]:
    """Cheapest way onto `path` from `pose`: (total cost, join index)."""
    turn_radius = robot.speed / robot.omega_max
    best = (math.inf, 0)
    for j, wp in enumerate(path.poses):
        d = pose.distance_to(wp.position)
        if j > 0 and d > ROUTE_LOOKAHEAD:
            continue
        if d > SHORTCUT_EPS:
            off = math.atan2(wp.y - pose.y, wp.x - pose.x) - pose.heading
        else:
            off = wp.heading - pose.heading
        hop = d + abs(math.remainder(off, math.tau)) * turn_radius
        cost = k * hop + (path.costs[-1] - path.costs[j])
        if cost < best[0]:
            best = (cost, j)
    return best


def _join_path(path: PathRecord, pose: Pose, robot: RobotParams,
               k: float) -> PathRecord:
    """Executable record for driving `path` from `pose`: a hop onto the
    cheapest join waypoint (charged with its turn arc, as in the hold
    estimate) followed by the path's remainder."""
    _, j = _best_join(path, pose, robot, k)
    wp = path.poses[j]
    d = pose.distance_to(wp.position)
    if d > SHORTCUT_EPS:
        off = math.atan2(wp.y - pose.y, wp.x - pose.x) - pose.heading
    else:
        off = wp.heading - pose.heading
    turn_radius = robot.speed / robot.omega_max
    hop = d + abs(math.remainder(off, math.tau)) * turn_radius
    poses = [pose] + list(path.poses[j:])
    costs = [0.0, k * max(hop, SHORTCUT_EPS)]
    for i in range(j + 1, len(path.poses)):
        costs.append(costs[-1] + (path.costs[i] - path.costs[i - 1]))
    return PathRecord(tuple(poses), tuple(costs),
                      created_at=path.created_at)


def _advance(pose: Pose, waypoints: List[Point], wp_idx: int,
             robot: RobotParams, distance: float, arrive_tol: float,
             lookahead: float = 0.0) -> Tuple[Pose, int, float]:
    """Travel up to `distance` of arc length toward successive waypoints.

    With a positive `lookahead`, pursues the first waypoint at least that
    far ahead (treating nearer ones as passed) — used for dense planner
    routes. Targets the robot cannot arc to directly (behind, or tighter
    than the steering limit) are approached by turning at the limit.
    Returns the new pose, the waypoint cursor, and the distance traveled.
    """
    remaining = distance
    while remaining > 1e-12 and wp_idx < len(waypoints):
        if pose.distance_to(waypoints[wp_idx]) <= arrive_tol:
            wp_idx += 1
            continue
        while (wp_idx + 1 < len(waypoints)
               and pose.distance_to(waypoints[wp_idx]) < lookahead):
            wp_idx += 1
        target = waypoints[wp_idx]
        edge = None
        try:
            cand = arc_between(pose, target, robot, 1.0)
            if (is_feasible(cand, robot, tol=FOLLOW_OMEGA_TOL)
                    and abs(cand.alpha) <= FOLLOW_ALPHA_MAX):
                edge = cand
        except DegenerateTarget:
            wp_idx += 1
            continue
        except BackwardTarget:
            pass
        if edge is None:
            pose = clamp_steer(pose, target, robot, arc_len=remaining)
            remaining = 0.0
            break
        if edge.length <= remaining:
            pose = edge.end_pose
            remaining -= edge.length
            wp_idx += 1
        else:
            pose = constant_omega_pose(pose, edge.omega, robot.speed, remaining)
            remaining = 0.0
    return pose, wp_idx, distance - remaining


def mission_step(state: RobotState, mission: MissionPlan, decision: Decision,
                 dt: float, world_k: Optional[float] = None,
                 task_cursor: int = 0,
                 arrive_tol: float = 0.1) -> Tuple[RobotState, int]:
    """Advance one tick along the task path (Continue) or the return path
    (Return); drains battery by k x distance traveled. Returns the new state
    and waypoint cursor."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    k = mission.world.k if world_k is None else world_k
    if decision.kind == "continue":
        waypoints = mission.task_path
        tol, lookahead = arrive_tol, 0.0
    else:
        waypoints = [p.position for p in decision.path.poses]
        tol, lookahead = ROUTE_WP_EPS, ROUTE_LOOKAHEAD
    pose, cursor, traveled = _advance(
        state.pose, waypoints, task_cursor, state.params,
        state.params.speed * dt, tol, lookahead)
    drain = k * traveled
    if state.battery - drain < -1e-9:
        raise BatteryDepleted(
            f"battery {state.battery:.6f} < required {drain:.6f}")
    return RobotState(pose, max(state.battery - drain, 0.0), state.params), cursor


def run_mission(mission: MissionPlan, eparams: EnergyParams,
                pparams: PlannerParams, seed: int = 0,
                goal_tolerance: Optional[float] = None,
                max_ticks: int = 200_000) -> MissionTrace:
    """Drive the robot along its task path with continuous return planning.

    Alternates decide_return and motion until the task path is traversed,
    recharging (instantaneously, to full) as needed. After a recharge the
    robot plans an RRT* path back to the interruption point (traced as the
    "resume" phase) and picks the task up where it left off.
    """
    k = mission.world.k
    robot = mission.robot
    tol = pparams.goal_tolerance if goal_tolerance is None else goal_tolerance
    state = RobotState(mission.start, eparams.battery_capacity, robot)

    trace = MissionTrace()
    phase = "task"
    task_idx = 0
    route: List[Point] = []
    route_idx = 0
    route_cost = 0.0
    route_planner = ""
    # Poses actually driven during the return phase; the resume route
    # retraces them in reverse (shortcut-compressed), which is collision
    # free by construction and avoids the cost scatter of a fresh
    # sampling-based plan from the station's arrival heading.
    return_trail: List[Point] = []
    interruption: Optional[Tuple[Pose, int]] = None
    decision: Optional[Decision] = None
    prev_station = mission.target_station
    # Last affordable return path, held across replans. A fresh plan that is
    # worse than this path (valued at its join cost from the current pose)
    # does not force a Return: single bad samples from the randomized
    # planners would otherwise trigger spurious returns.
    held: Optional[Decision] = None
    held_cost = 0.0
    # When set, return/resume motion interpolates along this precomputed
    # follower trajectory instead of pursuing waypoints, so drained battery
    # tracks the committed cost exactly.
    walk_path: Optional[PathRecord] = None
    walk_lens: List[float] = []
    walk_s = 0.0
    t = 0.0

    for tick in range(max_ticks):
        replan_ms = 0.0
        if phase == "task":
            if decision is None or tick % eparams.replan_period == 0:
                # The fresh plan and the held path are competing estimates of
                # the cheapest way back; classify against, and execute, the
                # cheaper of the two. Randomized planners occasionally return
                # one expensive path, and committing a return to it when a
                # cheaper known path is in hand both wastes battery and
                # triggers returns spuriously.
                try:
                    fresh = decide_return(
                        state, mission, eparams,
                        replace(pparams, rng_seed=seed + 101 * tick))
                except Stranded:
                    if held is None:
                        raise
                    fresh = None
                cands = []
                if fresh is not None:
                    cands.append((fresh.path.cost, 0, fresh))
                if held is not None:
                    est = _hold_cost(held.path, state.pose, robot, k)
                    cands.append((est, 1, held))
                best_cost, _, best = min(cands)
                if best_cost > state.battery:
                    raise Stranded(
                        f"no station reachable with battery "
                        f"{state.battery:.3f}")
                mission.target_station = best.station
                kind = ("continue"
                        if best_cost <= eparams.safety_factor * state.battery
                        else "return")
                decision = Decision(kind, best.path, best.station,
                                    best.planner_used,
                                    fresh.replan_ms if fresh else 0.0)
                held = decision
                held_cost = best_cost
                replan_ms = decision.replan_ms
                if mission.target_station != prev_station:
                    trace.station_switches += 1
                    prev_station = mission.target_station
            if decision.kind == "return":
                phase = "return"
                # Re-roll the follower from the exact current pose through
                # the planned route (appending the station itself: the plan
                # ends inside the goal tolerance, not at the station). The
                # result is the trajectory that will actually be driven, so
                # the committed cost equals the battery that execution will
                # drain — pursuit-tracking slack on a tight path can
                # otherwise overrun the estimate and deplete the battery.
                station_pos = mission.stations[mission.target_station]
                exec_path = _shortcut(
                    state.pose,
                    [p.position for p in decision.path.poses] + [station_pos],
                    mission.world, robot, k)
                if exec_path is None:
                    # Near workspace corners the follower vocabulary cannot
                    # re-roll the plan; the plan is a feasible trajectory in
                    # its own right, so drive its polyline directly from the
                    # cheapest join point. The plan ends within the planner's
                    # goal tolerance of the station, which can sit outside
                    # the recharge radius — finish with a hop onto the
                    # station itself so the walk cannot end short of it.
                    exec_path = _join_path(decision.path, state.pose,
                                           robot, k)
                    last = exec_path.poses[-1]
                    gap = last.distance_to(station_pos)
                    if gap > SHORTCUT_EPS:
                        bearing = math.atan2(station_pos[1] - last.y,
                                             station_pos[0] - last.x)
                        off = abs(math.remainder(bearing - last.heading,
                                                 math.tau))
                        hop = gap + off * robot.speed / robot.omega_max
                        exec_path = PathRecord(
                            exec_path.poses + (Pose(station_pos[0],
                                                    station_pos[1], bearing),),
                            exec_path.costs + (exec_path.costs[-1] + k * hop,),
                            created_at=exec_path.created_at)
                walk_path = exec_path
                walk_lens = [c / k for c in exec_path.costs]
                walk_s = 0.0
                route_cost = exec_path.cost
                route_planner = decision.planner_used
                interruption = (state.pose, task_idx)
                return_trail = [state.pose.position]
                # `held` survives the return/recharge/resume cycle: the world
                # is static, so the path stays valid, and after resuming at
                # the interruption point the robot is back within the
                # follower's capture radius of its start. Near workspace
                # corners a single fresh planning call can fail outright, and
                # this is the fallback that keeps one failure from stranding
                # a healthy robot.

        if phase == "task":
            row_decision, row_planner, row_cost = (
                "continue", decision.planner_used, held_cost)
        elif phase == "return":
            row_decision, row_planner, row_cost = ("return", route_planner, route_cost)
        else:
            row_decision, row_planner, row_cost = ("resume", route_planner, route_cost)
        trace.rows.append(TraceRow(
            t=t, x=state.pose.x, y=state.pose.y, heading=state.pose.heading,
            battery=state.battery, decision=row_decision,
            station=mission.target_station, path_cost=row_cost,
            planner=row_planner, replan_ms=replan_ms))

        step = robot.speed * eparams.dt
        if phase == "task":
            pose, task_idx, traveled = _advance(
                state.pose, mission.task_path, task_idx, robot, step, tol)
            # Consume waypoints reached by this very step, so arrival at the
            # final one registers now rather than after another replan cycle.
            while (task_idx < len(mission.task_path)
                   and pose.distance_to(mission.task_path[task_idx]) <= tol):
                task_idx += 1
        elif walk_path is not None:
            s_new = min(walk_s + step, walk_lens[-1])
            traveled = s_new - walk_s
            pose = _pose_along(walk_path, walk_lens, s_new)
            walk_s = s_new
        else:
            pose, route_idx, traveled = _advance(
                state.pose, route, route_idx, robot, step, ROUTE_WP_EPS,
                ROUTE_LOOKAHEAD)
        drain = k * traveled
        if state.battery - drain < -1e-9:
            raise BatteryDepleted(
                f"t={t:.3f}: battery {state.battery:.6f} < drain {drain:.6f}")
        state = RobotState(pose, max(state.battery - drain, 0.0), robot)
        t += eparams.dt

        if phase == "return":
            station_pos = mission.stations[mission.target_station]
            return_trail.append(state.pose.position)
            if state.pose.distance_to(station_pos) <= tol:
                state = RobotState(state.pose, eparams.battery_capacity, robot)
                trace.recharges += 1
                back_path = _shortcut(
                    state.pose,
                    _retrace_targets(state.pose, return_trail,
                                     interruption[0].position),
                    mission.world, robot, k)
                route_planner = "retrace"
                if back_path is None:
                    back = plan_rrt_star(
                        state.pose, interruption[0].position, mission.world,
                        robot,
                        replace(pparams, rng_seed=seed + 101 * tick + 13))
                    if back.status is not PlanStatus.FOUND:
                        raise Stranded("no path back to the interruption point")
                    back_path = smooth_route(back.path, mission.world, robot, k)
                    route_planner = "rrt_star"
                walk_path = back_path
                walk_lens = [c / k for c in back_path.costs]
                walk_s = 0.0
                route_cost = back_path.cost
                phase = "resume"
        elif phase == "resume":
            if (state.pose.distance_to(interruption[0].position) <= tol
                    or (walk_path is not None
                        and walk_s >= walk_lens[-1] - 1e-9)):
                phase = "task"
                task_idx = interruption[1]
                decision = None
                walk_path = None

        if phase == "task" and task_idx >= len(mission.task_path):
            trace.rows.append(TraceRow(
                t=t, x=state.pose.x, y=state.pose.y,
                heading=state.pose.heading, battery=state.battery,
                decision="continue", station=mission.target_station,
                path_cost=0.0, planner="", replan_ms=0.0))
            trace.completed = True
            return trace

    raise RuntimeError(f"mission did not complete within {max_ticks} ticks")
