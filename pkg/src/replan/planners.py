"""RRT, RRT*, ERRT, and the dynamic-path replanner with old-path replication.

All four planners share one growth engine so that the degenerate cases line
up exactly: with p_scan = 0 (dynamic) or an empty waypoint cache (ERRT) the
primary RNG stream is consumed identically to plain RRT and the resulting
trees match node for node. Scan/waypoint coins come from a second, dedicated
stream so they never perturb spatial sampling.
"""

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geom import (
    ArcEdge,
    BackwardTarget,
    DegenerateTarget,
    DEGENERATE_EPS,
    Point,
    Pose,
    RobotParams,
    WorldModel,
    arc_between,
    clamp_steer,
    constant_omega_pose,
    edge_collides,
    is_feasible,
    wrap_angle,
)
from .tree import Forest, PathRecord, Tree

# Candidate waypoints already present in the tree are matched by position
# within this radius and skipped (prevents duplicate replication).
POSITION_MATCH_EPS = 1e-9


@dataclass(frozen=True)
class PlannerParams:
    step: float = 0.05
    neighbor_radius: float = 0.15
    p_goal: float = 0.2
    p_scan: float = 0.7
    p_waypoint: float = 0.7
    max_nodes: int = 5000
    goal_tolerance: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p_goal", "p_scan", "p_waypoint"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.p_goal + self.p_waypoint > 1.0 + 1e-12:
            raise ValueError("p_goal + p_waypoint must be <= 1")
        if not self.step < self.neighbor_radius:
            raise ValueError("step must be < neighbor_radius")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.goal_tolerance <= 0.0:
            raise ValueError("goal_tolerance must be > 0")


class PlanStatus(Enum):
    FOUND = "found"
    NODE_BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class PlanResult:
    path: Optional[PathRecord]
    tree: Tree
    nodes_expanded: int
    wall_time: float
    status: PlanStatus

    @property
    def cost(self) -> float:
        return self.path.cost if self.path is not None else math.inf


def make_rng_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Primary (spatial sampling) and coin (scan/waypoint) generators."""
    s1, s2 = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(s1), np.random.default_rng(s2)


def sample(world: WorldModel, goal: Point, params: PlannerParams,
           rng: np.random.Generator) -> Point:
    """Goal with probability p_goal, else uniform in the workspace rectangle."""
    if rng.random() < params.p_goal:
        return goal
    return world.sample_point(rng)


def steer(tree: Tree, nearest_id: int, target: Point, params: PlannerParams,
          robot: RobotParams, world: WorldModel,
          is_goal: bool = False) -> Optional[Tuple[Pose, ArcEdge]]:
    """Bounded extension from a tree node toward `target`.

    Pulls far targets in to neighbor_radius, rejects sub-step targets
    (except the goal), clamps to the steering limit when the exact arc is
    infeasible, and rejects colliding or backward results.
    """
    node = tree.nodes[nearest_id]
    d = node.pose.distance_to(target)
    if d <= DEGENERATE_EPS:
        return None
    if d < params.step and not is_goal:
        return None
    if d > params.neighbor_radius:
        f = params.neighbor_radius / d
        target = (node.pose.x + (target[0] - node.pose.x) * f,
                  node.pose.y + (target[1] - node.pose.y) * f)
    try:
        edge = arc_between(node.pose, target, robot, world.k)
    except (DegenerateTarget, BackwardTarget):
        return None
    if not is_feasible(edge, robot):
        clamped = clamp_steer(node.pose, target, robot,
                              arc_len=min(d, params.neighbor_radius))
        try:
            edge = arc_between(node.pose, clamped.position, robot, world.k)
        except (DegenerateTarget, BackwardTarget):
            return None
    if edge_collides(edge, node.pose, world):
        return None
    if _duplicate_pose(tree, edge.end_pose):
        return None
    return edge.end_pose, edge


def _duplicate_pose(tree: Tree, pose: Pose) -> bool:
    """A node with the same position and heading already exists. Without this
    check a goal draw whose clamped steer keeps landing on the same point
    floods the tree with identical nodes."""
    for nid in tree.near_radius(pose.position, POSITION_MATCH_EPS):
        if abs(tree.nodes[nid].pose.heading - pose.heading) <= 1e-9:
            return True
    return False


def _exact_edge(from_pose: Pose, to: Point, robot: RobotParams,
                world: WorldModel) -> Optional[ArcEdge]:
    """Exact feasible, collision-free arc landing on `to`, or nothing.
    Used for RRT* parent selection and rewiring, where the endpoint is an
    existing node and must not move."""
    try:
        edge = arc_between(from_pose, to, robot, world.k)
    except (DegenerateTarget, BackwardTarget):
        return None
    if not is_feasible(edge, robot):
        return None
    if edge_collides(edge, from_pose, world):
        return None
    return edge


def _replication_edge(from_pose: Pose, to: Point, robot: RobotParams,
                      world: WorldModel,
                      max_len: float) -> Optional[ArcEdge]:
    """Steer toward an old-path waypoint: exact arc when feasible, otherwise
    clamped to the steering limit (the replicated node is then displaced from
    the waypoint). Colliding or backward targets yield nothing."""
    d = from_pose.distance_to(to)
    if d <= DEGENERATE_EPS:
        return None
    if d > max_len:
        f = max_len / d
        to = (from_pose.x + (to[0] - from_pose.x) * f,
              from_pose.y + (to[1] - from_pose.y) * f)
    try:
        edge = arc_between(from_pose, to, robot, world.k)
    except (DegenerateTarget, BackwardTarget):
        return None
    if not is_feasible(edge, robot):
        clamped = clamp_steer(from_pose, to, robot, arc_len=min(d, max_len))
        try:
            edge = arc_between(from_pose, clamped.position, robot, world.k)
        except (DegenerateTarget, BackwardTarget):
            return None
    if edge_collides(edge, from_pose, world):
        return None
    return edge


def _turn_edge(from_pose: Pose, to: Point, robot: RobotParams,
               world: WorldModel, arc_len: float) -> Optional[ArcEdge]:
    """Steering-limit turn toward `to`, as an explicit constant-curvature
    edge. Covers targets a single forward arc cannot reach (behind the
    heading); tries the natural turn direction first, the opposite one when
    that collides. Returns nothing when both turns collide."""
    bearing = math.atan2(to[1] - from_pose.y, to[0] - from_pose.x)
    alpha = wrap_angle(bearing - from_pose.heading)
    sign = 1.0 if alpha >= 0.0 else -1.0
    radius = robot.speed / robot.omega_max

    def excludes_target(s: float) -> bool:
        # A target strictly inside the chosen turning circle can never come
        # dead ahead: turning that way orbits it forever. Prefer the turn
        # whose circle keeps the target outside.
        cx = from_pose.x - s * radius * math.sin(from_pose.heading)
        cy = from_pose.y + s * radius * math.cos(from_pose.heading)
        return math.hypot(to[0] - cx, to[1] - cy) >= radius

    order = sorted((sign, -sign), key=lambda s: not excludes_target(s))
    for s in order:
        omega = s * robot.omega_max
        end = constant_omega_pose(from_pose, omega, robot.speed, arc_len)
        edge = ArcEdge(alpha=alpha, chord=from_pose.distance_to(end.position),
                       radius=radius, turn=omega * arc_len / robot.speed,
                       omega=omega, energy=world.k * arc_len,
                       start_pose=from_pose, end_pose=end)
        if not edge_collides(edge, from_pose, world):
            return edge
    return None


def path_building(tree: Tree, record: PathRecord, junction_index: int,
                  q_new_id: int, junction_edge: ArcEdge, robot: RobotParams,
                  world: WorldModel, max_len: float,
                  consumed: Optional[set] = None,
                  record_index: int = 0,
                  goal: Optional[Point] = None,
                  goal_tolerance: float = 0.0) -> List[int]:
    """Replicate the old path from the junction waypoint toward its goal.

    Each replicated node is steered from the previously attached node with a
    recomputed heading (clamped at the steering limit when needed), flagged
    part_of_old_path, and costed from the actual new edges. Replication
    truncates at the first colliding or backward step. Returns the ids of
    the attached nodes.
    """
    if consumed is not None:
        consumed.add((record_index, junction_index))
    new_ids = [tree.insert_node(q_new_id, junction_edge.end_pose, junction_edge,
                                part_of_old_path=True)]
    wi = junction_index
    while wi + 1 < len(record):
        cur = tree.nodes[new_ids[-1]]
        # Stride to the farthest upcoming waypoint within one steer length:
        # records densified by earlier replication rounds would otherwise
        # cost one tree node per tiny waypoint.
        nxt = wi + 1
        while (nxt + 1 < len(record)
               and cur.pose.distance_to(record.poses[nxt + 1].position)
               <= max_len):
            nxt += 1
        edge = _replication_edge(cur.pose, record.poses[nxt].position,
                                 robot, world, max_len)
        if edge is None:
            break
        if consumed is not None:
            for w in range(wi + 1, nxt + 1):
                consumed.add((record_index, w))
        new_ids.append(tree.insert_node(cur.id, edge.end_pose, edge,
                                        part_of_old_path=True))
        wi = nxt
    # Replicated copies drift slightly off the record (and the walk may
    # truncate short of it), so the chain tip can end just outside the goal
    # disk the record ended in; when the tip is within a few steps of the
    # goal, close the remaining gap with ordinary steer steps toward it.
    # Wide-radius replication can also overshoot the goal with the heading
    # pointing past it, where no forward arc reaches back — a steering-limit
    # turn step brings the goal back in front.
    if (goal is not None
            and tree.nodes[new_ids[-1]].pose.distance_to(goal)
            <= 6.0 * max_len):
        for _ in range(12):
            tip = tree.nodes[new_ids[-1]]
            if tip.pose.distance_to(goal) <= goal_tolerance:
                break
            edge = None
            try:
                cand = arc_between(tip.pose, goal, robot, world.k)
                if (is_feasible(cand, robot)
                        and not edge_collides(cand, tip.pose, world)):
                    edge = cand
            except (DegenerateTarget, BackwardTarget):
                pass
            if edge is None:
                edge = _turn_edge(tip.pose, goal, robot, world, max_len)
            if edge is None or _duplicate_pose(tree, edge.end_pose):
                break
            new_ids.append(tree.insert_node(tip.id, edge.end_pose, edge))
    return new_ids


def check_connection(tree: Tree, forest: Forest,
                     old_nodes: Sequence[Tuple[int, int]], q_new_id: int,
                     robot: RobotParams, world: WorldModel,
                     max_len: float = math.inf,
                     consumed: Optional[set] = None,
                     goal: Optional[Point] = None,
                     goal_tolerance: float = 0.0,
                     ride_len: Optional[float] = None) -> List[int]:
    """Replicate old paths into the tree starting from q_new. Junctions are
    tried cheapest-first; when a replication truncates before reaching the
    goal region, the next-best junction is tried (a truncated replica is a
    dead branch, and giving up after one leaves the search nearly cold).
    `max_len` bounds the junction hop; the walk along the record itself uses
    `ride_len` (defaults to max_len) — a widened scan ball should stretch
    only the bridge onto the old path, not the copying steps, whose repeated
    clamping otherwise drifts the replica far off the record. Returns the
    ids of all replicated nodes (empty when nothing is connectable)."""
    if ride_len is None:
        ride_len = max_len
    q_new = tree.nodes[q_new_id]
    candidates: List[Tuple[float, int, int, ArcEdge]] = []
    for ri, wi in old_nodes:
        if consumed is not None and (ri, wi) in consumed:
            continue
        record = forest.records[ri]
        wp = record.poses[wi]
        if tree.near_radius(wp.position, POSITION_MATCH_EPS):
            continue  # already replicated into this tree
        edge = _replication_edge(q_new.pose, wp.position, robot, world, max_len)
        if edge is None:
            continue
        if wi + 1 < len(record):
            # A junction the walk cannot continue from (next waypoint behind
            # the arrival heading) is useless; skip it.
            nxt = record.poses[wi + 1]
            bearing = math.atan2(nxt.y - edge.end_pose.y,
                                 nxt.x - edge.end_pose.x)
            if abs(wrap_angle(bearing - edge.end_pose.heading)) >= math.pi / 2.0:
                continue
        candidates.append((q_new.cost + edge.energy, ri, wi, edge))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    attached: List[int] = []
    for _, ri, wi, edge in candidates[:3]:
        if consumed is not None and (ri, wi) in consumed:
            continue
        new_ids = path_building(tree, forest.records[ri], wi, q_new_id, edge,
                                robot, world, ride_len, consumed=consumed,
                                record_index=ri, goal=goal,
                                goal_tolerance=goal_tolerance)
        attached.extend(new_ids)
        if goal is not None and any(
                tree.nodes[n].pose.distance_to(goal) <= goal_tolerance
                for n in new_ids):
            break
    return attached


def _plan(algorithm: str, start: Pose, goal: Point, world: WorldModel,
          robot: RobotParams, params: PlannerParams,
          forest: Optional[Forest] = None,
          waypoint_cache: Optional[List[Pose]] = None,
          budget: Optional[float] = None) -> PlanResult:
    t0 = time.perf_counter()
    primary, coin = make_rng_streams(params.rng_seed)
    tree = Tree(start, goal, index_cell=params.neighbor_radius)
    choose_parent = rewire = algorithm == "rrt_star"
    nodes_expanded = 0
    goal_ids: List[int] = []
    consumed: set = set()  # (record, waypoint) pairs already replicated

    def within_goal(pose: Pose) -> bool:
        return pose.distance_to(goal) <= params.goal_tolerance

    def finish(goal_id: Optional[int]) -> PlanResult:
        tree.goal_node = goal_id
        path = None
        status = PlanStatus.NODE_BUDGET_EXHAUSTED
        if goal_id is not None:
            created_at = forest.pushed if forest is not None else 0
            path = tree.extract_path(created_at=created_at)
            status = PlanStatus.FOUND
            if algorithm == "dynamic" and forest is not None:
                forest.push(path)
            if algorithm == "errt" and waypoint_cache is not None:
                waypoint_cache[:] = list(path.poses)
        return PlanResult(path=path, tree=tree, nodes_expanded=nodes_expanded,
                          wall_time=time.perf_counter() - t0, status=status)

    if within_goal(start):
        return finish(tree.root_id)

    def best_goal_id() -> Optional[int]:
        if not goal_ids:
            return None
        return min(goal_ids, key=lambda n: (tree.nodes[n].cost, n))

    def do_scan(node_id: int, radius: Optional[float] = None) -> List[int]:
        r = params.neighbor_radius if radius is None else radius
        pos = tree.nodes[node_id].pose.position
        old_nodes = forest.scan(pos, r)
        if not old_nodes:
            return []
        return check_connection(
            tree, forest, old_nodes, node_id, robot, world,
            max_len=r, consumed=consumed,
            goal=goal, goal_tolerance=params.goal_tolerance,
            ride_len=params.neighbor_radius)

    replicated_once = False

    def maybe_scan(node_id: int) -> List[int]:
        """With probability p_scan, replicate the cheapest old path reachable
        from this node. The coin comes from the dedicated stream. Until the
        first successful replication the scan ball is widened: before any
        attachment the whole forest may sit outside the normal ball, and
        growth would have to random-walk dozens of nodes before an insert
        happens to land near an old path."""
        nonlocal replicated_once
        if coin.random() >= params.p_scan:
            return []
        found = do_scan(node_id)
        if not found and not replicated_once:
            found = do_scan(node_id, radius=3.0 * params.neighbor_radius)
        replicated_once = replicated_once or bool(found)
        return found

    if algorithm == "dynamic" and forest is not None:
        # The replan root usually sits on the previous path (the robot has
        # been following the task while the old path aged), so the root gets
        # the same coin-gated scan treatment as every later insert — and,
        # like them, a widened ball until something attaches (see
        # maybe_scan). Keeping the root scan behind the coin preserves the
        # exact p_scan=0 equivalence with plain RRT even on a warm forest.
        replicated = maybe_scan(tree.root_id)
        nodes_expanded += len(replicated)
        for nid in replicated:
            if within_goal(tree.nodes[nid].pose):
                goal_ids.append(nid)
        if goal_ids:
            return finish(best_goal_id())

    # Goal-bias draws steer from the closest node to the goal that has not
    # yet produced a goal extension. Steering is deterministic per (node,
    # target), so re-steering from the same node can only recreate the same
    # (duplicate-rejected) endpoint; without this bookkeeping a misaligned
    # node sitting closest to the goal blocks every future goal draw.
    goal_heap: List[Tuple[float, int]] = [
        (start.distance_to(goal), tree.root_id)]
    goal_tried: set = set()

    def track_for_goal(node_id: int) -> None:
        heapq.heappush(
            goal_heap, (tree.nodes[node_id].pose.distance_to(goal), node_id))

    def next_goal_candidate() -> Optional[int]:
        while goal_heap:
            _, nid = goal_heap[0]
            if nid in goal_tried:
                heapq.heappop(goal_heap)
                continue
            return nid
        return None

    max_iterations = 50 * params.max_nodes
    iterations = 0
    while nodes_expanded < params.max_nodes and iterations < max_iterations:
        iterations += 1

        if algorithm == "errt":
            c = coin.random()
            if waypoint_cache and c < params.p_waypoint:
                idx = int(coin.integers(0, len(waypoint_cache)))
                target = waypoint_cache[idx].position
            else:
                target = sample(world, goal, params, primary)
        else:
            target = sample(world, goal, params, primary)

        is_goal_draw = bool(np.all(np.asarray(target) == np.asarray(goal)))
        if is_goal_draw:
            nearest_id = next_goal_candidate()
            if nearest_id is None:
                continue
            goal_tried.add(nearest_id)
        else:
            nearest_id = tree.nearest(target)
        steered = steer(tree, nearest_id, target, params, robot, world,
                        is_goal=is_goal_draw)
        if steered is None:
            continue
        pose, edge = steered

        parent_id = nearest_id
        neighbors: List[int] = []
        if choose_parent or rewire:
            neighbors = tree.near_radius(pose.position, params.neighbor_radius)
        if choose_parent:
            best_cost = tree.nodes[parent_id].cost + edge.energy
            for nid in neighbors:
                if nid == nearest_id:
                    continue
                cand = _exact_edge(tree.nodes[nid].pose, pose.position,
                                   robot, world)
                if cand is None:
                    continue
                cand_cost = tree.nodes[nid].cost + cand.energy
                if cand_cost < best_cost - 1e-12:
                    best_cost, parent_id, edge = cand_cost, nid, cand
            pose = edge.end_pose

        q_new = tree.insert_node(parent_id, pose, edge)
        nodes_expanded += 1
        new_ids = [q_new]

        if rewire:
            for nid in neighbors:
                if nid == parent_id:
                    continue
                node = tree.nodes[nid]
                # Only childless nodes are rewired: reparenting updates the
                # node's arrival heading, which would invalidate the arcs
                # already stored on its children.
                if node.children:
                    continue
                cand = _exact_edge(pose, node.pose.position, robot, world)
                if cand is None:
                    continue
                if tree.nodes[q_new].cost + cand.energy < node.cost - 1e-12:
                    tree.reparent(nid, q_new, cand)

        if algorithm == "dynamic" and forest is not None:
            replicated = maybe_scan(q_new)
            nodes_expanded += len(replicated)
            new_ids.extend(replicated)

        for nid in new_ids:
            track_for_goal(nid)
            if within_goal(tree.nodes[nid].pose):
                goal_ids.append(nid)

        if budget is None:
            if goal_ids:
                return finish(best_goal_id())
        else:
            best = best_goal_id()
            if best is not None and tree.nodes[best].cost <= budget:
                return finish(best)

    return finish(best_goal_id())


def plan_rrt(start: Pose, goal: Point, world: WorldModel, robot: RobotParams,
             params: PlannerParams) -> PlanResult:
    return _plan("rrt", start, goal, world, robot, params)


def plan_rrt_star(start: Pose, goal: Point, world: WorldModel,
                  robot: RobotParams, params: PlannerParams,
                  budget: Optional[float] = None) -> PlanResult:
    """RRT* with minimum-cost parent selection and rewiring. With `budget`
    set, keeps growing past the first goal hit until a path meets the budget
    (or the node budget runs out), returning the cheapest goal path found."""
    return _plan("rrt_star", start, goal, world, robot, params, budget=budget)


def plan_errt(start: Pose, goal: Point, world: WorldModel, robot: RobotParams,
              params: PlannerParams, waypoint_cache: List[Pose]) -> PlanResult:
    """ERRT: biases sampling toward waypoints of the previous path. On
    success the cache is replaced with the new path's poses."""
    return _plan("errt", start, goal, world, robot, params,
                 waypoint_cache=waypoint_cache)


def plan_dynamic(start: Pose, goal: Point, world: WorldModel,
                 robot: RobotParams, params: PlannerParams,
                 forest: Forest) -> PlanResult:
    """Dynamic-path replanner: after each insert, with probability p_scan,
    scans the forest for nearby old-path waypoints and replicates the
    cheapest connectable old path into the tree. Found paths are pushed
    into the forest."""
    return _plan("dynamic", start, goal, world, robot, params, forest=forest)


def audit_tree(tree: Tree, robot: RobotParams, world: WorldModel,
               omega_tol: float = 1e-9, cost_tol: float = 1e-9):
    """Full-tree integrity audit; raises AssertionError on violation.

    Checks the steering bound and collision-freeness of every edge, cost
    additivity along parent chains, and that the tree is a single-rooted
    acyclic graph covering all nodes.
    """
    roots = [n for n in tree.nodes.values() if n.parent is None]
    assert len(roots) == 1 and roots[0].id == tree.root_id, "single root"
    assert roots[0].cost == 0.0, "root cost must be 0"

    seen = set()
    stack = [tree.root_id]
    while stack:
        nid = stack.pop()
        assert nid not in seen, f"cycle through node {nid}"
        seen.add(nid)
        node = tree.nodes[nid]
        for cid in node.children:
            assert tree.nodes[cid].parent == nid, "parent/child mismatch"
            stack.append(cid)
    assert seen == set(tree.nodes), "unreachable nodes present"

    for node in tree.nodes.values():
        if node.parent is None:
            continue
        edge = node.edge_from_parent
        assert edge is not None, f"node {node.id} missing edge"
        assert abs(edge.omega) <= robot.omega_max + omega_tol, (
            f"node {node.id}: |omega|={abs(edge.omega)} exceeds bound")
        assert not edge_collides(edge, edge.start_pose, world), (
            f"node {node.id}: edge collides")
        expected = tree.nodes[node.parent].cost + edge.energy
        assert abs(node.cost - expected) <= cost_tol, (
            f"node {node.id}: cost {node.cost} != {expected}")
        chain_cost = 0.0
        nid = node.id
        while tree.nodes[nid].parent is not None:
            chain_cost += tree.nodes[nid].edge_from_parent.energy
            nid = tree.nodes[nid].parent
        assert abs(node.cost - chain_cost) <= cost_tol, (
            f"node {node.id}: chain cost mismatch")
