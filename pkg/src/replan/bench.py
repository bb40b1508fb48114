"""Monte Carlo benchmark harness.

Three studies over a moving-start corridor and a battery mission:

* replanning benchmark — the start pose slides along a line while the goal
  stays put; warm-started planners (dynamic, errt) carry state across
  iterations, cold planners (rrt, rrt_star) start fresh each time.
* p_scan study — the same corridor run with plan_dynamic at several scan
  probabilities, plus rrt_star reference rows for cost comparison.
* mission benchmark — wraps the battery-aware mission executor over seeds.

Cells (algorithm x seed lanes) are independent and run in parallel; the
``REPLAN_THREADS`` environment variable caps the worker count. Results are
ordered deterministically regardless of scheduling.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geom import Pose, RobotParams, WorldModel
from .tree import Forest
from .planners import (
    PlannerParams,
    PlanResult,
    PlanStatus,
    plan_dynamic,
    plan_errt,
    plan_rrt,
    plan_rrt_star,
)
from .energy import (EnergyParams, MissionPlan, MissionTrace, run_mission,
                     smooth_route)

ALGORITHMS = ("rrt", "rrt_star", "errt", "dynamic")

RAW_FIELDS = ("algorithm", "p_scan", "seed", "y", "start_x", "start_y",
              "nodes_expanded", "wall_time_ms", "path_cost", "status")
AGG_FIELDS = ("algorithm", "p_scan", "y", "seeds", "found",
              "nodes_expanded_mean", "nodes_expanded_median",
              "nodes_expanded_std",
              "wall_time_ms_mean", "wall_time_ms_median", "wall_time_ms_std",
              "path_cost_mean", "path_cost_median", "path_cost_std")


@dataclass(frozen=True)
class Scenario:
    """A moving-start benchmark: start at (start_x, y) for each y in `ys`,
    heading `start_heading`, planning to the fixed `goal`."""

    world: WorldModel
    robot: RobotParams
    planner: PlannerParams
    goal: Tuple[float, float]
    start_x: float = 3.0
    start_heading: float = math.pi / 2
    ys: Tuple[float, ...] = tuple(i * 0.25 for i in range(13))
    algorithms: Tuple[str, ...] = ("rrt", "rrt_star", "errt", "dynamic")
    seeds: Tuple[int, ...] = tuple(range(10))
    p_scan_values: Tuple[float, ...] = (0.0, 0.3, 0.7, 0.9)

    def __post_init__(self):
        if len(self.seeds) < 1:
            raise ValueError("at least one seed is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        for p in self.p_scan_values:
            if not 0.0 <= p <= 1.0:
                raise ValueError("p_scan sweep values must lie in [0, 1]")

    def start_pose(self, y: float) -> Pose:
        return Pose(self.start_x, y, self.start_heading)

    def cell_seed(self, seed: int, y_index: int) -> int:
        """Per-(seed, start position) RNG seed, shared across algorithms so
        cold and warm planners face identical sample streams."""
        return seed * 1000 + y_index


@dataclass(frozen=True)
class RawRow:
    """One planner call."""

    algorithm: str
    p_scan: float
    seed: int
    y: float
    start_x: float
    start_y: float
    nodes_expanded: int
    wall_time_ms: float
    path_cost: float  # NaN when no path was found
    status: str

    def as_record(self) -> dict:
        return {f: getattr(self, f) for f in RAW_FIELDS}


@dataclass(frozen=True)
class StatRow:
    """Per-(algorithm, p_scan, y) aggregate over seeds."""

    algorithm: str
    p_scan: float
    y: float
    seeds: int
    found: int
    nodes_expanded_mean: float
    nodes_expanded_median: float
    nodes_expanded_std: float
    wall_time_ms_mean: float
    wall_time_ms_median: float
    wall_time_ms_std: float
    path_cost_mean: float
    path_cost_median: float
    path_cost_std: float

    def as_record(self) -> dict:
        return {f: getattr(self, f) for f in AGG_FIELDS}


def _max_workers() -> int:
    env = os.environ.get("REPLAN_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _raw_row(algorithm: str, p_scan: float, seed: int, y: float,
             start: Pose, result: PlanResult) -> RawRow:
    cost = result.cost if result.path is not None else float("nan")
    return RawRow(algorithm=algorithm, p_scan=p_scan, seed=seed, y=y,
                  start_x=start.x, start_y=start.y,
                  nodes_expanded=result.nodes_expanded,
                  wall_time_ms=result.wall_time * 1000.0,
                  path_cost=cost,
                  status=result.status.value)


def _run_lane(scenario: Scenario, algorithm: str, seed: int,
              p_scan: Optional[float] = None) -> List[RawRow]:
    """One (algorithm, seed) lane: iterate the start along the trajectory.
    dynamic carries its forest, errt its waypoint cache; rrt and rrt_star
    run cold at every start. dynamic bootstraps with a pure rrt_star plan
    while its forest is empty.

    The recorded path cost is the executable-route cost: the planner's
    path re-rolled by the steering follower, exactly as the mission layer
    drives routes. Raw sampling paths wander by construction (planners stop
    at their first goal hit), and their as-sampled costs measure that
    wander noise more than path quality."""
    world, robot = scenario.world, scenario.robot
    base = scenario.planner
    if p_scan is not None:
        base = replace(base, p_scan=p_scan)
    forest = Forest(capacity=5)
    cache: List[Pose] = []
    rows: List[RawRow] = []
    for yi, y in enumerate(scenario.ys):
        start = scenario.start_pose(y)
        params = replace(base, rng_seed=scenario.cell_seed(seed, yi))
        if algorithm == "rrt":
            result = plan_rrt(start, scenario.goal, world, robot, params)
        elif algorithm == "rrt_star":
            result = plan_rrt_star(start, scenario.goal, world, robot, params)
        elif algorithm == "errt":
            result = plan_errt(start, scenario.goal, world, robot, params,
                               waypoint_cache=cache)
        elif algorithm == "dynamic":
            if len(forest.records) == 0:
                result = plan_rrt_star(start, scenario.goal, world, robot,
                                       params)
                if result.path is not None:
                    forest.push(result.path)
            else:
                result = plan_dynamic(start, scenario.goal, world, robot,
                                      params, forest=forest)
        else:  # pragma: no cover - rejected at construction
            raise ValueError(algorithm)
        if result.path is not None:
            result = replace(result, path=smooth_route(
                result.path, world, robot, world.k))
        rows.append(_raw_row(algorithm, base.p_scan, seed, y, start, result))
    return rows


def aggregate(rows: Sequence[RawRow]) -> List[StatRow]:
    """Group raw rows by (algorithm, p_scan, y) and compute mean / median /
    population standard deviation per metric. Cost statistics cover found
    runs only; rows with zero found runs report NaN costs."""
    groups: Dict[Tuple[str, float, float], List[RawRow]] = {}
    order: List[Tuple[str, float, float]] = []
    for r in rows:
        key = (r.algorithm, r.p_scan, r.y)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)

    out: List[StatRow] = []
    for key in order:
        g = groups[key]
        nodes = np.array([r.nodes_expanded for r in g], dtype=float)
        times = np.array([r.wall_time_ms for r in g], dtype=float)
        costs = np.array([r.path_cost for r in g
                          if not math.isnan(r.path_cost)], dtype=float)
        if costs.size == 0:
            c_mean = c_med = c_std = float("nan")
        else:
            c_mean = float(np.mean(costs))
            c_med = float(np.median(costs))
            c_std = float(np.std(costs))
        out.append(StatRow(
            algorithm=key[0], p_scan=key[1], y=key[2],
            seeds=len(g), found=int(costs.size),
            nodes_expanded_mean=float(np.mean(nodes)),
            nodes_expanded_median=float(np.median(nodes)),
            nodes_expanded_std=float(np.std(nodes)),
            wall_time_ms_mean=float(np.mean(times)),
            wall_time_ms_median=float(np.median(times)),
            wall_time_ms_std=float(np.std(times)),
            path_cost_mean=c_mean, path_cost_median=c_med, path_cost_std=c_std,
        ))
    return out


def run_replanning_benchmark(
        scenario: Scenario) -> Tuple[List[RawRow], List[StatRow]]:
    """Moving-start comparison of the configured algorithms. Returns
    (raw rows, aggregated rows); raw rows exist for every aggregate."""
    lanes = [(alg, seed) for alg in scenario.algorithms
             for seed in scenario.seeds]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(
            lambda cell: _run_lane(scenario, cell[0], cell[1]), lanes))
    rows = [r for lane in results for r in lane]
    return rows, aggregate(rows)


def run_pscan_study(scenario: Scenario) -> Tuple[List[RawRow], List[StatRow]]:
    """Cost-vs-scan-probability study: plan_dynamic swept over
    scenario.p_scan_values with a shared-seed cold start per value, plus
    rrt_star reference rows at the same seeds for cost comparison."""
    lanes: List[Tuple[str, int, Optional[float]]] = []
    for p in scenario.p_scan_values:
        for seed in scenario.seeds:
            lanes.append(("dynamic", seed, p))
    for seed in scenario.seeds:
        lanes.append(("rrt_star", seed, None))
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(
            lambda cell: _run_lane(scenario, cell[0], cell[1], cell[2]),
            lanes))
    rows = [r for lane in results for r in lane]
    return rows, aggregate(rows)


@dataclass
class MissionSummary:
    seed: int
    completed: bool
    recharges: int
    station_switches: int
    ticks: int
    total_distance: float
    min_battery: float
    wall_time_ms: float


def run_mission_benchmark(mission: MissionPlan, eparams: EnergyParams,
                          pparams: PlannerParams, seeds: Sequence[int],
                          ) -> List[Tuple[int, MissionTrace, MissionSummary]]:
    """Runs the battery-aware mission once per seed and summarizes each
    trace. Missions are independent; lanes run in parallel."""
    def one(seed: int) -> Tuple[int, MissionTrace, MissionSummary]:
        t0 = time.perf_counter()
        trace = run_mission(mission.fresh_copy(), eparams, pparams, seed)
        wall = (time.perf_counter() - t0) * 1000.0
        dist = eparams.dt * mission.robot.v * max(0, len(trace.rows) - 1)
        summary = MissionSummary(
            seed=seed, completed=trace.completed, recharges=trace.recharges,
            station_switches=trace.station_switches, ticks=len(trace.rows),
            total_distance=dist, min_battery=trace.min_battery,
            wall_time_ms=wall)
        return seed, trace, summary

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(one, list(seeds)))
    return results


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.9g" % value
    return str(value)


def write_raw_csv(rows: Sequence[RawRow], path: str,
                  deterministic_timing: bool = True) -> None:
    """Writes one row per planner call. With deterministic_timing (the
    default) the wall-clock column is written as 0 so identical invocations
    produce byte-identical files; pass False to record measured times."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_FIELDS)
        for r in rows:
            rec = r.as_record()
            if deterministic_timing:
                rec["wall_time_ms"] = 0.0
            w.writerow([_fmt(rec[f]) for f in RAW_FIELDS])


def write_agg_csv(rows: Sequence[RawRow], path: str,
                  deterministic_timing: bool = True) -> None:
    """Writes aggregates recomputed from the exact values that went into the
    raw CSV, so re-aggregating raw.csv reproduces agg.csv."""
    if deterministic_timing:
        rows = [RawRow(**{**r.as_record(), "wall_time_ms": 0.0})
                for r in rows]
    stats = aggregate(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGG_FIELDS)
        for s in stats:
            rec = s.as_record()
            w.writerow([_fmt(rec[f]) for f in AGG_FIELDS])


def write_benchmark_csvs(rows: Sequence[RawRow], out_dir: str,
                         deterministic_timing: bool = True) -> Tuple[str, str]:
    """Emits raw.csv then agg.csv into out_dir; raw rows are always written
    before any aggregate exists on disk."""
    os.makedirs(out_dir, exist_ok=True)
    raw_path = os.path.join(out_dir, "raw.csv")
    agg_path = os.path.join(out_dir, "agg.csv")
    write_raw_csv(rows, raw_path, deterministic_timing)
    write_agg_csv(rows, agg_path, deterministic_timing)
    return raw_path, agg_path
