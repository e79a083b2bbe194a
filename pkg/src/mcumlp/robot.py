"""Differential-drive robot in an axis-aligned world, driven by a trained MLP.

Three proximity rays (front, left, right) are cast from the robot centre and
reported as the free distance in front of the body disc, clamped to the
sensor range. The network sees them in the order (FS, RS, LS), the column
order of the training tables, and answers (left wheel, right wheel) angular
speeds through the target codec.

Map text format (one directive per line, ``#`` starts a comment)::

    name    <label>
    bounds  <xmin> <ymin> <xmax> <ymax>
    rect    <xmin> <ymin> <xmax> <ymax>     (any number)
    start   <x> <y> <heading_rad>           (optional)

All lengths are meters. ``bounds`` is required and must come before any
``rect``.
"""

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import NamedTuple

import numpy as np

from .data import rows_to_csv
from .errors import OutOfWorldError, ParseError, ShapeError
from .mlp import predict

TRAJECTORY_HEADER = ("t", "x", "y", "heading", "fs", "ls", "rs", "wl", "wr", "collision")
BUILTIN_MAPS = ("empty", "parallel", "cluttered")
# Clearance that ends a contact episode (m).
CONTACT_RELEASE = 0.02


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"empty rectangle {self}")

    def contains_rect(self, other):
        return (self.xmin <= other.xmin and other.xmax <= self.xmax
                and self.ymin <= other.ymin and other.ymax <= self.ymax)


@dataclass(frozen=True)
class WorldMap:
    bounds: Rect
    obstacles: tuple = ()
    name: str = "unnamed"
    start: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for ob in self.obstacles:
            if not self.bounds.contains_rect(ob):
                raise ValueError(f"obstacle {ob} lies outside bounds {self.bounds}")

    @property
    def center(self):
        b = self.bounds
        return (b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float = 0.0
    wheel_radius: float = 0.033
    axle_length: float = 0.26
    body_radius: float = 0.17

    def __post_init__(self):
        if min(self.wheel_radius, self.axle_length, self.body_radius) <= 0:
            raise ValueError("wheel radius, axle length and body radius must be > 0")


@dataclass(frozen=True)
class SensorRig:
    """Ray directions relative to the heading, in radians."""

    front: float = 0.0
    left: float = math.pi / 4
    right: float = -math.pi / 4
    max_range: float = 3.0


class Readings(NamedTuple):
    fs: float
    rs: float
    ls: float


@dataclass(frozen=True)
class TrajectoryRow:
    t: float
    x: float
    y: float
    heading: float
    fs: float
    ls: float
    rs: float
    wl: float
    wr: float
    collision: bool


@dataclass
class EpisodeResult:
    trajectory: list = field(default_factory=list)
    collisions: int = 0
    completed: bool = True
    final_state: RobotState = None

    def poses(self):
        pts = [(r.x, r.y) for r in self.trajectory]
        if self.final_state is not None:
            pts.append((self.final_state.x, self.final_state.y))
        return pts

    def path_length(self):
        pts = self.poses()
        return math.fsum(math.dist(a, b) for a, b in zip(pts, pts[1:]))

    def net_displacement(self):
        pts = self.poses()
        return math.dist(pts[0], pts[-1]) if pts else 0.0

    def to_csv(self):
        rows = [
            (float(r.t), float(r.x), float(r.y), float(r.heading), float(r.fs), float(r.ls),
             float(r.rs), float(r.wl), float(r.wr), bool(r.collision))
            for r in self.trajectory
        ]
        return rows_to_csv(TRAJECTORY_HEADER, rows)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a == -math.pi else a


def _inside(world, x, y):
    b = world.bounds
    return b.xmin <= x <= b.xmax and b.ymin <= y <= b.ymax


def _ray_exit_bounds(b, x, y, dx, dy):
    t = math.inf
    if dx > 0:
        t = min(t, (b.xmax - x) / dx)
    elif dx < 0:
        t = min(t, (b.xmin - x) / dx)
    if dy > 0:
        t = min(t, (b.ymax - y) / dy)
    elif dy < 0:
        t = min(t, (b.ymin - y) / dy)
    return t


def _ray_hit_rect(r, x, y, dx, dy):
    """Entry distance of a ray into a rectangle (slab test), or inf."""
    t_near, t_far = -math.inf, math.inf
    for origin, d, lo, hi in ((x, dx, r.xmin, r.xmax), (y, dy, r.ymin, r.ymax)):
        if d == 0.0:
            if origin < lo or origin > hi:
                return math.inf
            continue
        t1, t2 = (lo - origin) / d, (hi - origin) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_near, t_far = max(t_near, t1), min(t_far, t2)
    if t_near > t_far or t_far < 0:
        return math.inf
    return max(t_near, 0.0)


def ray_distance(world, x, y, angle):
    """Distance from (x, y) along ``angle`` to the first wall or obstacle."""
    dx, dy = math.cos(angle), math.sin(angle)
    # Snap direction components that are zero up to rounding (e.g. cos(pi/2)).
    if abs(dx) < 1e-15:
        dx = 0.0
    if abs(dy) < 1e-15:
        dy = 0.0
    t = _ray_exit_bounds(world.bounds, x, y, dx, dy)
    for ob in world.obstacles:
        t = min(t, _ray_hit_rect(ob, x, y, dx, dy))
    return t


def cast_sensors(state, world, rig=SensorRig()):
    """Return ``Readings(fs, rs, ls)`` measured from the body perimeter."""
    if not _inside(world, state.x, state.y):
        raise OutOfWorldError(f"robot at ({state.x}, {state.y}) is outside {world.bounds}")

    def read(offset):
        d = ray_distance(world, state.x, state.y, state.heading + offset) - state.body_radius
        return min(max(d, 0.0), rig.max_range)

    return Readings(read(rig.front), read(rig.right), read(rig.left))


def step_kinematics(state, wl, wr, dt):
    if not dt > 0:
        raise ValueError("dt must be > 0")
    r, b = state.wheel_radius, state.axle_length
    v = r * (wl + wr) / 2
    omega = r * (wr - wl) / b
    return replace(
        state,
        x=state.x + v * math.cos(state.heading) * dt,
        y=state.y + v * math.sin(state.heading) * dt,
        heading=wrap_angle(state.heading + omega * dt),
    )


def disc_hits(world, x, y, radius):
    """True iff a disc strictly overlaps an obstacle or crosses the bounds."""
    b = world.bounds
    if x - radius < b.xmin or x + radius > b.xmax or y - radius < b.ymin or y + radius > b.ymax:
        return True
    r2 = radius * radius
    for ob in world.obstacles:
        cx = min(max(x, ob.xmin), ob.xmax)
        cy = min(max(y, ob.ymin), ob.ymax)
        if (x - cx) ** 2 + (y - cy) ** 2 < r2:
            return True
    return False


def detect_collision(state, world):
    return disc_hits(world, state.x, state.y, state.body_radius)


def _contact_point(world, old, new, iterations=50):
    """Furthest collision-free point on the straight move from ``old`` to ``new``."""
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = (lo + hi) / 2
        x = old.x + mid * (new.x - old.x)
        y = old.y + mid * (new.y - old.y)
        if disc_hits(world, x, y, old.body_radius):
            hi = mid
        else:
            lo = mid
    return replace(new, x=old.x + lo * (new.x - old.x), y=old.y + lo * (new.y - old.y))


def initial_state(world, **geometry):
    if world.start is not None:
        x, y, heading = world.start
    else:
        (x, y), heading = world.center, 0.0
    return RobotState(x, y, heading, **geometry)


def _decode(outputs, codec):
    out = np.asarray(outputs, dtype=np.float64).ravel()
    if codec is not None:
        out = codec.decode(out)
    return float(out[0]), float(out[1])


def run_episode(world, net, codec, duration, dt=0.1, state=None, rig=SensorRig(),
                release=CONTACT_RELEASE):
    """Closed-loop episode: sense, infer, decode wheel speeds, move.

    A move that would overlap an obstacle is cut at the contact point. One
    contact episode counts as one collision; it lasts until the body clears
    every obstacle by more than ``release`` meters, so dragging along a wall
    is a single collision.
    """
    if net.widths[0] != 3 or net.widths[-1] != 2:
        raise ShapeError(f"controller must map 3 sensors to 2 wheels, got {net.widths}")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if release < 0:
        raise ValueError("release must be >= 0")
    state = initial_state(world) if state is None else state
    result = EpisodeResult()
    in_contact = False
    for k in range(int(round(duration / dt))):
        readings = cast_sensors(state, world, rig)
        y = predict(net, np.array([[readings.fs], [readings.rs], [readings.ls]], np.float32))
        wl, wr = _decode(y, codec)
        moved = step_kinematics(state, wl, wr, dt)
        hit = detect_collision(moved, world)
        if hit:
            moved = _contact_point(world, state, moved)
            if not in_contact:
                result.collisions += 1
            in_contact = True
        elif in_contact:
            in_contact = disc_hits(world, moved.x, moved.y, moved.body_radius + release)
        result.trajectory.append(TrajectoryRow(
            k * dt, state.x, state.y, state.heading,
            readings.fs, readings.ls, readings.rs, wl, wr, hit,
        ))
        state = moved
    result.final_state = state
    return result


def contact_steps(poses, world, radius):
    """Number of replayed ``(x, y)`` poses whose body disc overlaps the world."""
    return sum(disc_hits(world, x, y, radius) for x, y in poses)


def parse_map(text):
    name, bounds, obstacles, start = "unnamed", None, [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        try:
            if key == "name":
                if len(args) != 1:
                    raise ValueError("name takes one label")
                name = args[0]
            elif key in ("bounds", "rect"):
                if len(args) != 4:
                    raise ValueError(f"{key} takes 4 numbers")
                rect = Rect(*map(float, args))
                if key == "bounds":
                    bounds = rect
                elif bounds is None:
                    raise ValueError("rect before bounds")
                else:
                    obstacles.append(rect)
            elif key == "start":
                if len(args) != 3:
                    raise ValueError("start takes x y heading")
                start = tuple(map(float, args))
            else:
                raise ValueError(f"unknown directive {key!r}")
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if bounds is None:
        raise ParseError("missing bounds directive")
    try:
        return WorldMap(bounds, tuple(obstacles), name, start)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_map(name_or_path):
    """Load a built-in map by name or a map file by path."""
    if name_or_path in BUILTIN_MAPS:
        text = resources.files("mcumlp").joinpath("data").joinpath("maps").joinpath(f"{name_or_path}.map").read_text()
    else:
        with open(name_or_path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_map(text)
