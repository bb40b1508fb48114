"""Command-line interface.

Subcommands:

* ``plan`` — single planning query; writes a path CSV and prints a one-line
  summary. Exit 0 when a path is found, 2 when the node budget runs out.
* ``bench replanning`` / ``bench pscan`` — Monte Carlo studies; write
  raw.csv and agg.csv into an output directory. Exit 0.
* ``mission`` — battery-aware mission simulation; writes a trace CSV.
  Exit 0 on completion, 3 when the robot is stranded or depleted.

Config problems exit 1 with a message on standard error. Output files are
byte-identical across identical invocations: wall-clock columns are written
as 0 unless ``--real-timing`` is given.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from typing import List, Optional, Sequence

from . import __version__
from .geom import Pose
from .tree import Forest
from .planners import (PlanStatus, plan_dynamic, plan_errt, plan_rrt,
                       plan_rrt_star)
from .bench import Scenario, run_pscan_study, run_replanning_benchmark, write_benchmark_csvs
from .config import Config, ParseError, ValidationError, load_config
from .energy import BatteryDepleted, EnergyParams, Stranded, run_mission

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_NO_PATH = 2
EXIT_MISSION_FAILED = 3


def _fmt(value: float) -> str:
    return "%.9g" % value


def _parse_floats(text: str, n: int, what: str) -> List[float]:
    parts = text.split(",")
    if len(parts) != n:
        raise ValidationError(f"{what}: expected {n} comma-separated numbers")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ValidationError(f"{what}: {exc}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replan",
        description="Sampling-based replanning: RRT, RRT*, ERRT, and a "
                    "dynamic replanner reusing a forest of old paths, plus "
                    "a battery-aware mission simulator.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="single planning query")
    p_plan.add_argument("--config", required=True)
    p_plan.add_argument("--algo", required=True,
                        choices=["rrt", "rrt_star", "errt", "dynamic"])
    p_plan.add_argument("--start", required=True,
                        help="X,Y,PSI with PSI in degrees")
    p_plan.add_argument("--goal", required=True, help="X,Y")
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.add_argument("--out", help="path CSV output file")

    p_bench = sub.add_parser("bench", help="Monte Carlo studies")
    bench_sub = p_bench.add_subparsers(dest="study", required=True)
    for study in ("replanning", "pscan"):
        b = bench_sub.add_parser(study)
        b.add_argument("--config", required=True)
        b.add_argument("--out-dir", required=True)
        b.add_argument("--real-timing", action="store_true",
                       help="record measured wall-clock columns instead of "
                            "deterministic zeros")

    p_mission = sub.add_parser("mission", help="battery-aware mission run")
    p_mission.add_argument("--config", required=True)
    p_mission.add_argument("--out", required=True, help="trace CSV file")
    p_mission.add_argument("--seed", type=int, default=0)
    p_mission.add_argument("--real-timing", action="store_true")
    return parser


def _cmd_plan(args, cfg: Config) -> int:
    sx, sy, psi_deg = _parse_floats(args.start, 3, "--start")
    gx, gy = _parse_floats(args.goal, 2, "--goal")
    start = Pose(sx, sy, math.radians(psi_deg))
    goal = (gx, gy)
    params = replace(cfg.planner, rng_seed=args.seed)

    if args.algo == "rrt":
        result = plan_rrt(start, goal, cfg.world, cfg.robot, params)
    elif args.algo == "rrt_star":
        result = plan_rrt_star(start, goal, cfg.world, cfg.robot, params)
    elif args.algo == "errt":
        result = plan_errt(start, goal, cfg.world, cfg.robot, params,
                           waypoint_cache=[])
    else:
        result = plan_dynamic(start, goal, cfg.world, cfg.robot, params,
                              forest=Forest(cfg.forest_capacity))

    if args.out and result.path is not None:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("x", "y", "heading", "cost"))
            for row in result.path.csv_rows():
                w.writerow([_fmt(v) for v in row])

    cost = result.cost if result.path is not None else float("nan")
    print(f"status={result.status.value} cost={_fmt(cost)} "
          f"nodes={result.nodes_expanded} "
          f"time_ms={_fmt(result.wall_time * 1000.0)}")
    return EXIT_OK if result.status is PlanStatus.FOUND else EXIT_NO_PATH


def _scenario(cfg: Config) -> Scenario:
    if cfg.goal is None:
        raise ValidationError("goal: required for benchmarks")
    return Scenario(world=cfg.world, robot=cfg.robot, planner=cfg.planner,
                    goal=cfg.goal, start_x=cfg.bench.start_x,
                    start_heading=cfg.bench.start_heading, ys=cfg.bench.ys,
                    algorithms=cfg.bench.algorithms, seeds=cfg.seeds,
                    p_scan_values=cfg.bench.p_scan_values)


def _cmd_bench(args, cfg: Config) -> int:
    scenario = _scenario(cfg)
    if args.study == "replanning":
        rows, _ = run_replanning_benchmark(scenario)
    else:
        rows, _ = run_pscan_study(scenario)
    raw_path, agg_path = write_benchmark_csvs(
        rows, args.out_dir, deterministic_timing=not args.real_timing)
    print(f"wrote {raw_path} and {agg_path} ({len(rows)} planner calls)")
    return EXIT_OK


def _cmd_mission(args, cfg: Config) -> int:
    if cfg.energy is None:
        raise ValidationError("energy: required for missions")
    mission = cfg.mission_plan()
    try:
        trace = run_mission(mission, cfg.energy, cfg.planner, seed=args.seed)
    except (Stranded, BatteryDepleted) as exc:
        print(f"mission failed: {exc}", file=sys.stderr)
        return EXIT_MISSION_FAILED

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "x", "y", "heading", "battery", "decision",
                    "station", "path_cost", "planner", "replan_ms"))
        for r in trace.rows:
            replan_ms = r.replan_ms if args.real_timing else 0.0
            w.writerow((_fmt(r.t), _fmt(r.x), _fmt(r.y), _fmt(r.heading),
                        _fmt(r.battery), r.decision, r.station,
                        _fmt(r.path_cost), r.planner, _fmt(replan_ms)))
    print(f"completed={trace.completed} recharges={trace.recharges} "
          f"station_switches={trace.station_switches} "
          f"min_battery={_fmt(trace.min_battery)} ticks={len(trace.rows)}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "plan":
            return _cmd_plan(args, cfg)
        if args.command == "bench":
            return _cmd_bench(args, cfg)
        return _cmd_mission(args, cfg)
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
