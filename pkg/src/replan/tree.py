"""Search tree, spatial grid index, path records, and the forest of old paths."""

import math
from collections import deque

import numpy as np
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .geom import ArcEdge, Point, Pose


class UnknownParent(KeyError):
    """insert_node called with a parent id not in the tree."""


class NoPath(RuntimeError):
    """extract_path called before the goal was reached."""


@dataclass
class TreeNode:
    id: int
    pose: Pose
    parent: Optional[int]
    cost: float
    edge_from_parent: Optional[ArcEdge] = None
    children: Set[int] = field(default_factory=set)
    part_of_old_path: bool = False


@dataclass(frozen=True)
class PathRecord:
    """Start-to-goal pose sequence with cumulative costs, as found by a planner."""

    poses: Tuple[Pose, ...]
    costs: Tuple[float, ...]
    created_at: int = 0

    @property
    def cost(self) -> float:
        return self.costs[-1]

    def __len__(self) -> int:
        return len(self.poses)

    def csv_rows(self) -> List[Tuple[float, float, float, float]]:
        return [
            (p.x, p.y, p.heading, c) for p, c in zip(self.poses, self.costs)
        ]


class _GridIndex:
    """Uniform-grid point index; answers nearest and radius queries."""

    def __init__(self, cell: float):
        self.cell = cell
        self.cells: Dict[Tuple[int, int], List[int]] = {}
        self.points: List[Point] = []
        # Dense coordinate buffer mirroring self.points (NaN rows for unused
        # ids); nearest queries reduce over it in one vectorized pass, which
        # beats cell-ring scanning at every tree size used here.
        self._buf = np.full((64, 2), np.nan)
        self._n = 0

    def _key(self, p: Point) -> Tuple[int, int]:
        return (math.floor(p[0] / self.cell), math.floor(p[1] / self.cell))

    def add(self, node_id: int, p: Point):
        while len(self.points) <= node_id:
            self.points.append((math.nan, math.nan))
        self.points[node_id] = p
        self.cells.setdefault(self._key(p), []).append(node_id)
        if node_id >= len(self._buf):
            grown = np.full((2 * max(len(self._buf), node_id + 1), 2), np.nan)
            grown[:len(self._buf)] = self._buf
            self._buf = grown
        self._buf[node_id, 0] = p[0]
        self._buf[node_id, 1] = p[1]
        self._n = max(self._n, node_id + 1)

    def nearest(self, p: Point) -> int:
        # Ties on distance resolve to the lowest id (argmin keeps the first).
        if self._n == 0:
            raise RuntimeError("nearest query on empty index")
        a = self._buf[:self._n]
        d2 = (a[:, 0] - p[0]) ** 2 + (a[:, 1] - p[1]) ** 2
        return int(np.nanargmin(d2))

    def within(self, p: Point, r: float) -> List[Tuple[float, int]]:
        kx0, ky0 = self._key((p[0] - r, p[1] - r))
        kx1, ky1 = self._key((p[0] + r, p[1] + r))
        out = []
        for cx in range(kx0, kx1 + 1):
            for cy in range(ky0, ky1 + 1):
                for nid in self.cells.get((cx, cy), ()):
                    q = self.points[nid]
                    d = math.hypot(q[0] - p[0], q[1] - p[1])
                    if d <= r:
                        out.append((d, nid))
        out.sort()
        return out


class Tree:
    """Rooted search tree with an id-indexed node table and spatial index."""

    def __init__(self, root_pose: Pose, goal: Point, index_cell: float = 0.15):
        self.nodes: Dict[int, TreeNode] = {}
        self.goal = goal
        self.goal_node: Optional[int] = None
        self._index = _GridIndex(index_cell)
        self._next_id = 0
        self.root_id = self._alloc(root_pose, None, 0.0, None)

    def _alloc(self, pose, parent, cost, edge, old_path=False) -> int:
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = TreeNode(
            id=nid, pose=pose, parent=parent, cost=cost,
            edge_from_parent=edge, part_of_old_path=old_path,
        )
        self._index.add(nid, pose.position)
        return nid

    def __len__(self) -> int:
        return len(self.nodes)

    def insert_node(self, parent_id: int, pose: Pose, edge: ArcEdge,
                    part_of_old_path: bool = False) -> int:
        if parent_id not in self.nodes:
            raise UnknownParent(parent_id)
        parent = self.nodes[parent_id]
        nid = self._alloc(pose, parent_id, parent.cost + edge.energy, edge,
                          old_path=part_of_old_path)
        parent.children.add(nid)
        return nid

    def nearest(self, point: Point) -> int:
        if not self.nodes:
            raise RuntimeError("tree is empty")
        return self._index.nearest(point)

    def near_radius(self, point: Point, r: float) -> List[int]:
        if r <= 0.0:
            raise ValueError("r must be > 0")
        return [nid for _, nid in self._index.within(point, r)]

    def reparent(self, node_id: int, new_parent_id: int, edge: ArcEdge):
        """Re-route node through new_parent; updates pose heading and subtree costs."""
        node = self.nodes[node_id]
        new_parent = self.nodes[new_parent_id]
        old_parent = self.nodes[node.parent]
        old_parent.children.discard(node_id)
        new_parent.children.add(node_id)
        node.parent = new_parent_id
        node.edge_from_parent = edge
        node.pose = edge.end_pose
        delta = (new_parent.cost + edge.energy) - node.cost
        stack = [node_id]
        while stack:
            nid = stack.pop()
            self.nodes[nid].cost += delta
            stack.extend(self.nodes[nid].children)

    def path_to_root(self, node_id: int) -> List[int]:
        chain = []
        nid: Optional[int] = node_id
        while nid is not None:
            chain.append(nid)
            nid = self.nodes[nid].parent
        chain.reverse()
        return chain

    def extract_path(self, created_at: int = 0) -> PathRecord:
        if self.goal_node is None:
            raise NoPath("goal was never reached")
        chain = self.path_to_root(self.goal_node)
        poses = tuple(self.nodes[n].pose for n in chain)
        costs = tuple(self.nodes[n].cost for n in chain)
        return PathRecord(poses=poses, costs=costs, created_at=created_at)


class Forest:
    """FIFO collection of previously found paths; oldest evicted at capacity."""

    def __init__(self, capacity: int = 5):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.records: deque = deque(maxlen=capacity)
        self.pushed = 0

    def __len__(self) -> int:
        return len(self.records)

    def push(self, record: PathRecord):
        self.records.append(record)
        self.pushed += 1

    def scan(self, point: Point, r: float) -> List[Tuple[int, int]]:
        """All (record index, waypoint index) pairs within distance r of point."""
        if r <= 0.0:
            raise ValueError("r must be > 0")
        hits = []
        for ri, rec in enumerate(self.records):
            for wi, pose in enumerate(rec.poses):
                if math.hypot(pose.x - point[0], pose.y - point[1]) <= r:
                    hits.append((ri, wi))
        return hits


def forest_push(forest: Forest, record: PathRecord):
    forest.push(record)


def forest_scan(forest: Forest, point: Point, r: float) -> List[Tuple[int, int]]:
    return forest.scan(point, r)
