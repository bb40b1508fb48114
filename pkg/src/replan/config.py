"""JSON scenario/config loading and validation.

Configs are JSON objects; every section is optional except `world.bounds`.
Unknown keys are rejected at every level so typos fail loudly. Angles in
config files are degrees (human-facing); everything internal is radians,
converted here at the boundary and nowhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .geom import Pose, RobotParams, Segment, WorldModel
from .planners import PlannerParams
from .energy import EnergyParams, MissionPlan


class ParseError(ValueError):
    """The config file is not well-formed JSON or not a JSON object."""


class ValidationError(ValueError):
    """A config value violates a domain constraint; names the field."""


@dataclass
class BenchConfig:
    start_x: float = 3.0
    start_heading: float = math.pi / 2  # radians internally
    ys: Tuple[float, ...] = tuple(i * 0.25 for i in range(13))
    algorithms: Tuple[str, ...] = ("rrt", "rrt_star", "errt", "dynamic")
    p_scan_values: Tuple[float, ...] = (0.0, 0.3, 0.7, 0.9)


@dataclass
class Config:
    world: WorldModel
    robot: RobotParams
    planner: PlannerParams
    energy: Optional[EnergyParams]
    forest_capacity: int
    stations: List[Tuple[float, float]]
    task_path: List[Tuple[float, float]]
    start: Optional[Pose]
    goal: Optional[Tuple[float, float]]
    seeds: Tuple[int, ...]
    bench: BenchConfig

    def mission_plan(self) -> MissionPlan:
        if self.start is None:
            raise ValidationError("start: required for missions")
        if not self.stations:
            raise ValidationError("stations: required for missions")
        if not self.task_path:
            raise ValidationError("task_path: required for missions")
        return MissionPlan(self.world, self.robot, self.start,
                           list(self.task_path), list(self.stations),
                           self.forest_capacity)


def _require_keys(obj: dict, allowed: Sequence[str], where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ValidationError(f"{where}{key}: unknown key")


def _number(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where}{key}: expected a number")
    return float(v)


def _integer(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{where}{key}: expected an integer")
    return v


def _point(value, where: str) -> Tuple[float, float]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2 or
            any(isinstance(c, bool) or not isinstance(c, (int, float))
                for c in value)):
        raise ValidationError(f"{where}: expected [x, y]")
    return float(value[0]), float(value[1])


def _world(data: dict) -> WorldModel:
    obj = data.get("world")
    if obj is None:
        raise ValidationError("world: required")
    if not isinstance(obj, dict):
        raise ValidationError("world: expected an object")
    _require_keys(obj, ("bounds", "obstacles", "k"), "world.")
    bounds = obj.get("bounds")
    if (not isinstance(bounds, (list, tuple)) or len(bounds) != 4 or
            any(isinstance(b, bool) or not isinstance(b, (int, float))
                for b in bounds)):
        raise ValidationError("world.bounds: expected [xmin, xmax, ymin, ymax]")
    obstacles = []
    for i, seg in enumerate(obj.get("obstacles", [])):
        if not isinstance(seg, (list, tuple)) or len(seg) != 2:
            raise ValidationError(
                f"world.obstacles[{i}]: expected [[x1, y1], [x2, y2]]")
        p1 = _point(seg[0], f"world.obstacles[{i}][0]")
        p2 = _point(seg[1], f"world.obstacles[{i}][1]")
        obstacles.append(Segment(p1, p2))
    k = _number(obj, "k", "world.", 1.0)
    try:
        return WorldModel(float(bounds[0]), float(bounds[1]),
                          float(bounds[2]), float(bounds[3]),
                          obstacles=obstacles, k=k)
    except ValueError as exc:
        raise ValidationError(f"world: {exc}") from exc


def _robot(data: dict) -> RobotParams:
    obj = data.get("robot", {})
    if not isinstance(obj, dict):
        raise ValidationError("robot: expected an object")
    _require_keys(obj, ("v", "wheelbase", "max_steer_deg"), "robot.")
    v = _number(obj, "v", "robot.", 1.0)
    wheelbase = _number(obj, "wheelbase", "robot.", 0.5)
    steer_deg = _number(obj, "max_steer_deg", "robot.", 40.0)
    if not 0.0 < steer_deg < 90.0:
        raise ValidationError("robot.max_steer: must be in (0, 90) degrees")
    try:
        return RobotParams(speed=v, wheelbase=wheelbase,
                           max_steer=math.radians(steer_deg))
    except ValueError as exc:
        raise ValidationError(f"robot: {exc}") from exc


def _planner(data: dict) -> Tuple[PlannerParams, float]:
    obj = data.get("planner", {})
    if not isinstance(obj, dict):
        raise ValidationError("planner: expected an object")
    allowed = ("step", "neighbor_radius", "p_goal", "p_scan", "p_waypoint",
               "max_nodes", "goal_tolerance", "collision_resolution")
    _require_keys(obj, allowed, "planner.")
    step = _number(obj, "step", "planner.", 0.05)
    kwargs = dict(
        step=step,
        neighbor_radius=_number(obj, "neighbor_radius", "planner.", 3 * step),
        p_goal=_number(obj, "p_goal", "planner.", 0.2),
        p_scan=_number(obj, "p_scan", "planner.", 0.7),
        p_waypoint=_number(obj, "p_waypoint", "planner.", 0.7),
        max_nodes=_integer(obj, "max_nodes", "planner.", 5000),
        goal_tolerance=_number(obj, "goal_tolerance", "planner.", 0.1),
    )
    resolution = _number(obj, "collision_resolution", "planner.", 0.01)
    if resolution <= 0.0:
        raise ValidationError("planner.collision_resolution: must be > 0")
    try:
        return PlannerParams(**kwargs), resolution
    except ValueError as exc:
        raise ValidationError(f"planner.{exc}") from exc


def _energy(data: dict) -> Optional[EnergyParams]:
    obj = data.get("energy")
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValidationError("energy: expected an object")
    _require_keys(obj, ("battery_capacity", "safety_factor", "replan_period",
                        "dt"), "energy.")
    capacity = _number(obj, "battery_capacity", "energy.")
    if capacity is None:
        raise ValidationError("energy.battery_capacity: required")
    try:
        return EnergyParams(
            battery_capacity=capacity,
            safety_factor=_number(obj, "safety_factor", "energy.", 0.8),
            replan_period=_integer(obj, "replan_period", "energy.", 1),
            dt=_number(obj, "dt", "energy.", 0.1))
    except ValueError as exc:
        raise ValidationError(f"energy.{exc}") from exc


def _bench(data: dict) -> BenchConfig:
    obj = data.get("bench", {})
    if not isinstance(obj, dict):
        raise ValidationError("bench: expected an object")
    allowed = ("start_x", "start_heading_deg", "ys", "algorithms",
               "p_scan_values")
    _require_keys(obj, allowed, "bench.")
    out = BenchConfig()
    out.start_x = _number(obj, "start_x", "bench.", out.start_x)
    heading_deg = _number(obj, "start_heading_deg", "bench.", None)
    if heading_deg is not None:
        out.start_heading = math.radians(heading_deg)
    if "ys" in obj:
        ys = obj["ys"]
        if (not isinstance(ys, list) or not ys or
                any(isinstance(y, bool) or not isinstance(y, (int, float))
                    for y in ys)):
            raise ValidationError("bench.ys: expected a non-empty number list")
        out.ys = tuple(float(y) for y in ys)
    if "algorithms" in obj:
        algos = obj["algorithms"]
        known = ("rrt", "rrt_star", "errt", "dynamic")
        if (not isinstance(algos, list) or not algos or
                any(a not in known for a in algos)):
            raise ValidationError(
                "bench.algorithms: expected a non-empty subset of "
                "rrt, rrt_star, errt, dynamic")
        out.algorithms = tuple(algos)
    if "p_scan_values" in obj:
        ps = obj["p_scan_values"]
        if (not isinstance(ps, list) or not ps or
                any(isinstance(p, bool) or not isinstance(p, (int, float)) or
                    not 0.0 <= p <= 1.0 for p in ps)):
            raise ValidationError(
                "bench.p_scan_values: expected probabilities in [0, 1]")
        out.p_scan_values = tuple(float(p) for p in ps)
    return out


TOP_LEVEL_KEYS = ("world", "robot", "planner", "energy", "forest_capacity",
                  "stations", "task_path", "start", "goal", "seeds", "bench")


def parse_config(data: dict) -> Config:
    """Validates an already-parsed JSON object into a Config."""
    if not isinstance(data, dict):
        raise ParseError("top level: expected a JSON object")
    _require_keys(data, TOP_LEVEL_KEYS, "")

    planner, resolution = _planner(data)
    world = _world(data)
    if resolution != world.collision_resolution:
        world = WorldModel(world.xmin, world.xmax, world.ymin, world.ymax,
                           obstacles=world.obstacles, k=world.k,
                           collision_resolution=resolution)

    forest_capacity = _integer(data, "forest_capacity", "", 5)
    if forest_capacity < 1:
        raise ValidationError("forest_capacity: must be >= 1")

    stations = [_point(p, f"stations[{i}]")
                for i, p in enumerate(data.get("stations", []))]
    task_path = [_point(p, f"task_path[{i}]")
                 for i, p in enumerate(data.get("task_path", []))]

    start = None
    if "start" in data:
        raw = data["start"]
        if (not isinstance(raw, list) or len(raw) != 3 or
                any(isinstance(c, bool) or not isinstance(c, (int, float))
                    for c in raw)):
            raise ValidationError("start: expected [x, y, heading_deg]")
        start = Pose(float(raw[0]), float(raw[1]), math.radians(raw[2]))

    goal = _point(data["goal"], "goal") if "goal" in data else None

    seeds: Tuple[int, ...] = tuple(range(10))
    if "seeds" in data:
        raw = data["seeds"]
        if (not isinstance(raw, list) or not raw or
                any(isinstance(s, bool) or not isinstance(s, int)
                    for s in raw)):
            raise ValidationError("seeds: expected a non-empty integer list")
        seeds = tuple(raw)

    return Config(world=world, robot=_robot(data), planner=planner,
                  energy=_energy(data), forest_capacity=forest_capacity,
                  stations=stations, task_path=task_path, start=start,
                  goal=goal, seeds=seeds, bench=_bench(data))


def load_config(path: str) -> Config:
    """Reads and validates a JSON config file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_config(data)
