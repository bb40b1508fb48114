"""Arc kinematics, steering feasibility, energy cost, and 2D collision checks.

All planners connect poses with single circular arcs that leave the start
pose tangent to its heading. Everything here is a pure function.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

Point = Tuple[float, float]

# |alpha| below this is treated as a straight line (R would overflow).
STRAIGHT_EPS = 1e-9
# Start/target closer than this is degenerate.
DEGENERATE_EPS = 1e-12
# Targets needing a turn of pi or more (|alpha| >= pi/2) are unreachable
# by a single forward arc.
BACKWARD_EPS = 1e-9


class DegenerateTarget(ValueError):
    """Target coincides with the start position."""


class BackwardTarget(ValueError):
    """Target lies behind the heading beyond a half U-turn."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float  # radians, kept in (-pi, pi]

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> Point:
        return (self.x, self.y)

    def distance_to(self, p: Point) -> float:
        return math.hypot(p[0] - self.x, p[1] - self.y)


@dataclass(frozen=True)
class RobotParams:
    speed: float = 1.0
    wheelbase: float = 0.5
    max_steer: float = math.radians(40.0)

    def __post_init__(self):
        if self.speed <= 0.0:
            raise ValueError("speed must be > 0")
        if self.wheelbase <= 0.0:
            raise ValueError("wheelbase must be > 0")
        if not 0.0 < self.max_steer < math.pi / 2.0:
            raise ValueError("max_steer must be in (0, pi/2)")

    @property
    def omega_max(self) -> float:
        return (self.speed / self.wheelbase) * math.tan(self.max_steer)

    @property
    def min_turn_radius(self) -> float:
        return self.speed / self.omega_max


@dataclass(frozen=True)
class ArcEdge:
    """Circular arc leaving a pose tangent to its heading.

    radius is math.inf for the straight-line case; omega and turn carry the
    sign of the turn direction (positive = counter-clockwise).
    """

    alpha: float
    chord: float
    radius: float
    turn: float
    omega: float
    energy: float
    start_pose: Pose
    end_pose: Pose

    @property
    def length(self) -> float:
        if math.isinf(self.radius):
            return self.chord
        return self.radius * abs(self.turn)


@dataclass(frozen=True)
class Segment:
    p1: Point
    p2: Point

    def __post_init__(self):
        if self.p1 == self.p2:
            raise ValueError("segment endpoints must differ")


@dataclass
class WorldModel:
    """Rectangular workspace with line-segment obstacles."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    obstacles: List[Segment] = field(default_factory=list)
    k: float = 1.0  # energy per unit distance
    collision_resolution: float = 0.01
    _obstacle_array: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ValueError("workspace rectangle is empty")
        if self.k <= 0.0:
            raise ValueError("k must be > 0")
        if self.collision_resolution <= 0.0:
            raise ValueError("collision_resolution must be > 0")

    def obstacle_array(self) -> np.ndarray:
        """Obstacles as an (M, 4) array of (x1, y1, x2, y2)."""
        if self._obstacle_array is None or len(self._obstacle_array) != len(self.obstacles):
            self._obstacle_array = np.array(
                [[s.p1[0], s.p1[1], s.p2[0], s.p2[1]] for s in self.obstacles],
                dtype=float,
            ).reshape(len(self.obstacles), 4)
        return self._obstacle_array

    def contains(self, p: Point) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def sample_point(self, rng: np.random.Generator) -> Point:
        x = rng.uniform(self.xmin, self.xmax)
        y = rng.uniform(self.ymin, self.ymax)
        return (x, y)


def arc_between(start: Pose, to: Point, params: RobotParams, k: float) -> ArcEdge:
    """Unique arc leaving `start` tangent to its heading and ending at `to`.

    Raises DegenerateTarget when `to` coincides with the start position and
    BackwardTarget when the chord points behind the heading (|alpha| >= pi/2).
    """
    dx = to[0] - start.x
    dy = to[1] - start.y
    d = math.hypot(dx, dy)
    if d <= DEGENERATE_EPS:
        raise DegenerateTarget(f"target {to} coincides with start position")
    chord_angle = math.atan2(dy, dx)
    alpha = wrap_angle(chord_angle - start.heading)
    if abs(alpha) >= math.pi / 2.0 + BACKWARD_EPS:
        raise BackwardTarget(f"target {to} requires turn of {2 * alpha:.4f} rad")

    v = params.speed
    if abs(alpha) <= STRAIGHT_EPS:
        end = Pose(to[0], to[1], start.heading)
        return ArcEdge(
            alpha=alpha, chord=d, radius=math.inf, turn=0.0, omega=0.0,
            energy=k * d, start_pose=start, end_pose=end,
        )

    radius = d / (2.0 * math.sin(abs(alpha)))
    theta = 2.0 * alpha
    omega = math.copysign(v / radius, alpha)
    arc_len = radius * abs(theta)
    end = Pose(to[0], to[1], start.heading + theta)
    return ArcEdge(
        alpha=alpha, chord=d, radius=radius, turn=theta, omega=omega,
        energy=k * arc_len, start_pose=start, end_pose=end,
    )


def is_feasible(edge: ArcEdge, params: RobotParams, tol: float = 1e-9) -> bool:
    """True iff the arc respects the steering-rate bound (v/L) tan(max_steer)."""
    return abs(edge.omega) <= params.omega_max + tol


def constant_omega_pose(start: Pose, omega: float, v: float, arc_len: float) -> Pose:
    """Pose after traveling `arc_len` at constant speed v and turn rate omega."""
    t = arc_len / v
    if abs(omega) <= STRAIGHT_EPS:
        return Pose(
            start.x + arc_len * math.cos(start.heading),
            start.y + arc_len * math.sin(start.heading),
            start.heading,
        )
    psi1 = start.heading + omega * t
    x = start.x + (v / omega) * (math.sin(psi1) - math.sin(start.heading))
    y = start.y - (v / omega) * (math.cos(psi1) - math.cos(start.heading))
    return Pose(x, y, psi1)


def clamp_steer(start: Pose, to: Point, params: RobotParams, arc_len: float) -> Pose:
    """Travel `arc_len` at the steering limit, turning toward `to`.

    Used when the exact arc to `to` would exceed omega_max; the endpoint
    no longer coincides with `to`.
    """
    chord_angle = math.atan2(to[1] - start.y, to[0] - start.x)
    alpha = wrap_angle(chord_angle - start.heading)
    sign = 1.0 if alpha >= 0.0 else -1.0
    omega = sign * params.omega_max
    return constant_omega_pose(start, omega, params.speed, arc_len)


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    return (
        min(ax, bx) <= px <= max(ax, bx)
        and min(ay, by) <= py <= max(ay, by)
    )


def segments_intersect(a: Segment, b: Segment) -> bool:
    """Closed-segment intersection; endpoint contact and collinear overlap count."""
    ax, ay = a.p1
    bx, by = a.p2
    cx, cy = b.p1
    dx, dy = b.p2
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d2 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    if d3 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d4 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    return False


def discretize_edge(edge: ArcEdge, start: Pose, resolution: float) -> np.ndarray:
    """Polyline approximation of the arc with arc-length spacing <= resolution."""
    length = edge.length
    if math.isinf(edge.radius) or edge.omega == 0.0:
        n = max(1, math.ceil(length / resolution))
        xs = np.linspace(start.x, edge.end_pose.x, n + 1)
        ys = np.linspace(start.y, edge.end_pose.y, n + 1)
        return np.column_stack([xs, ys])
    n = max(1, math.ceil(length / resolution))
    # Constant-curvature rollout: closed form at evenly spaced arc lengths.
    omega = edge.turn / length  # rad per unit arc length
    s = np.linspace(0.0, length, n + 1)
    psi = start.heading + omega * s
    r = 1.0 / omega
    xs = start.x + r * (np.sin(psi) - math.sin(start.heading))
    ys = start.y - r * (np.cos(psi) - math.cos(start.heading))
    pts = np.column_stack([xs, ys])
    # Land exactly on the analytic endpoint.
    pts[-1] = [edge.end_pose.x, edge.end_pose.y]
    return pts


def _polyline_hits_segments(pts: np.ndarray, segs: np.ndarray) -> bool:
    """Vectorized closed-segment intersection of a polyline against (M,4) segments."""
    if len(segs) == 0 or len(pts) < 2:
        return False
    a1 = pts[:-1]  # (N,2)
    a2 = pts[1:]
    b1 = segs[:, 0:2]  # (M,2)
    b2 = segs[:, 2:4]

    def cross(ox, oy, px, py, qx, qy):
        return (px - ox) * (qy - oy) - (py - oy) * (qx - ox)

    a1x = a1[:, 0][:, None]; a1y = a1[:, 1][:, None]
    a2x = a2[:, 0][:, None]; a2y = a2[:, 1][:, None]
    b1x = b1[:, 0][None, :]; b1y = b1[:, 1][None, :]
    b2x = b2[:, 0][None, :]; b2y = b2[:, 1][None, :]

    d1 = cross(b1x, b1y, b2x, b2y, a1x, a1y)
    d2 = cross(b1x, b1y, b2x, b2y, a2x, a2y)
    d3 = cross(a1x, a1y, a2x, a2y, b1x, b1y)
    d4 = cross(a1x, a1y, a2x, a2y, b2x, b2y)

    proper = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0)) \
        & (d1 != 0) & (d2 != 0) & (d3 != 0) & (d4 != 0)
    if proper.any():
        return True

    def on_seg(px, py, qx, qy, rx, ry):
        return (
            (np.minimum(px, qx) <= rx) & (rx <= np.maximum(px, qx))
            & (np.minimum(py, qy) <= ry) & (ry <= np.maximum(py, qy))
        )

    touch = (
        ((d1 == 0) & on_seg(b1x, b1y, b2x, b2y, a1x, a1y))
        | ((d2 == 0) & on_seg(b1x, b1y, b2x, b2y, a2x, a2y))
        | ((d3 == 0) & on_seg(a1x, a1y, a2x, a2y, b1x, b1y))
        | ((d4 == 0) & on_seg(a1x, a1y, a2x, a2y, b2x, b2y))
    )
    return bool(touch.any())


def edge_collides(edge: ArcEdge, start: Pose, world: WorldModel) -> bool:
    """True iff the arc hits any obstacle segment or leaves the workspace.

    The arc is discretized at world.collision_resolution; leaving the closed
    workspace rectangle counts as a collision (boundary contact is allowed
    so starts on the field edge remain usable).
    """
    pts = discretize_edge(edge, start, world.collision_resolution)
    eps = 1e-12
    out = (
        (pts[:, 0] < world.xmin - eps) | (pts[:, 0] > world.xmax + eps)
        | (pts[:, 1] < world.ymin - eps) | (pts[:, 1] > world.ymax + eps)
    )
    if out.any():
        return True
    return _polyline_hits_segments(pts, world.obstacle_array())
