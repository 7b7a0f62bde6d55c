"""Deterministic 2D world: arena geometry, differential-drive motion with
swept-disc collision, ray-cast IR sensing and a synthetic color camera.

Scale assumptions (the source experiments give none): a 2 m x 2 m arena,
0.09 m robot radius, 0.25 m/s rim speed at full wheel command, 0.2 s per
action step. These make the per-epoch step budgets enough to traverse the
arena tens of times.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import IO, Union

import numpy as np

from .geometry import (
    integrate_arc,
    normalize_angle,
    point_in_polygon,
    point_polygon_distance,
    point_segments_distance,
    polygon_edges,
    ray_circle_hit,
    ray_segments_hit,
)

log = logging.getLogger(__name__)

SPEED_SCALE = 0.25        # m/s of rim speed at normalized wheel command 1.0
STEP_DT = 0.2             # seconds per action step
FOOD_RADIUS = 0.035
IR_NOISE_AMPLITUDE = 0.02
BUILTIN_MAP_NAMES = ("walls", "obstacles", "maze")

# Sensor bearings, degrees, left positive. Order pairs mirror sensors so that
# flipping left/right is an index swap: (0, +25, -25, +50, -50, +135, -135, 180).
IR_BEARINGS_DEG = (0.0, 25.0, -25.0, 50.0, -50.0, 135.0, -135.0, 180.0)

BACKGROUND, GREEN, RED = 0, 1, 2
COLOR_CODES = {"green": GREEN, "red": RED}

# Substep length for swept-disc collision detection; crossings of a thin wall
# move the centre within ~1 mm of it, so 2 mm sampling cannot tunnel.
_COLLISION_SUBSTEP = 0.002
_BISECT_ITERS = 48


class MapError(ValueError):
    """Map document failed to parse or validate; message names the field."""


class PlacementError(ValueError):
    """Food placement could not satisfy its constraints."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)
                and math.isfinite(self.heading)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class CameraSpec:
    fov: float = math.radians(60.0)
    max_range: float = 2.0
    width: int = 64
    height: int = 48
    mount_height: float = 0.10  # camera height over ground, flat-ground model

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(self.fov / 2.0)


@dataclass(frozen=True)
class RobotBody:
    radius: float = 0.09
    wheel_base: float = 0.11
    ir_bearings: tuple[float, ...] = tuple(math.radians(d) for d in IR_BEARINGS_DEG)
    ir_max_range: float = 0.30
    camera: CameraSpec | None = CameraSpec()

    def __post_init__(self):
        if self.radius <= 0 or self.wheel_base <= 0 or self.ir_max_range <= 0:
            raise ValueError("body dimensions must be positive")


@dataclass
class WorldMap:
    """Static arena geometry. Coordinates live in [0, w] x [0, h] meters."""

    name: str
    arena_w: float
    arena_h: float
    walls: np.ndarray                  # (N, 4) segments
    obstacles: list[np.ndarray]        # convex polygons, (M, 2) each
    robot_start: Pose
    food_zone: tuple[float, float, float, float]   # x, y, w, h
    prey_start: Pose | None = None
    _collision_segments: np.ndarray | None = field(default=None, repr=False)

    @property
    def collision_segments(self) -> np.ndarray:
        """Walls plus all obstacle edges, stacked once and cached."""
        if self._collision_segments is None:
            parts = [np.asarray(self.walls, dtype=float).reshape(-1, 4)]
            parts += [polygon_edges(poly) for poly in self.obstacles]
            self._collision_segments = np.vstack(parts) if parts else np.empty((0, 4))
        return self._collision_segments


@dataclass(frozen=True)
class FoodItem:
    x: float
    y: float
    radius: float = FOOD_RADIUS
    eaten: bool = False


@dataclass(frozen=True)
class PreyState:
    pose: Pose
    body: RobotBody = RobotBody(camera=None)


@dataclass
class WorldState:
    map: WorldMap
    robot: Pose
    body: RobotBody = RobotBody()
    food: tuple[FoodItem, ...] = ()
    prey: PreyState | None = None
    tick: int = 0
    contact: bool = False   # last kinematics step ended on a wall/obstacle


@dataclass(frozen=True)
class CameraFrame:
    """Synthetic color-label raster; cells hold BACKGROUND / GREEN / RED."""

    width: int
    height: int
    cells: np.ndarray

    def __post_init__(self):
        if self.cells.shape != (self.height, self.width):
            raise ValueError("frame cells must be (height, width)")


def initial_world(world_map: WorldMap, body: RobotBody | None = None,
                  with_prey: bool = False) -> WorldState:
    body = body or RobotBody()
    prey = None
    if with_prey:
        if world_map.prey_start is None:
            raise MapError(f"map {world_map.name!r}: prey_start: missing")
        prey = PreyState(world_map.prey_start)
    return WorldState(map=world_map, robot=world_map.robot_start, body=body, prey=prey)


# ---------------------------------------------------------------------------
# Kinematics


def wheel_rates(left_speed: float, right_speed: float, wheel_base: float) -> tuple[float, float]:
    """(linear m/s, angular rad/s) for normalized wheel commands."""
    v = (left_speed + right_speed) / 2.0 * SPEED_SCALE
    omega = (right_speed - left_speed) * SPEED_SCALE / wheel_base
    return v, omega


def _clearance(world_map: WorldMap, x: float, y: float) -> float:
    segs = world_map.collision_segments
    if segs.size == 0:
        return math.inf
    return float(np.min(point_segments_distance(x, y, segs)))


def _move_disc(world_map: WorldMap, pose: Pose, radius: float,
               v: float, omega: float, dt: float) -> tuple[Pose, bool]:
    """Advance a disc along its arc, stopping at first wall/obstacle contact."""

    def pose_at(tau: float) -> tuple[float, float, float]:
        return integrate_arc(pose.x, pose.y, pose.heading, v, omega, tau * dt)

    travel = abs(v) * dt
    if travel == 0.0:
        x, y, h = pose_at(1.0)
        return Pose(x, y, h), False

    start_gap = _clearance(world_map, pose.x, pose.y) - radius
    if start_gap > travel + 1e-6:
        x, y, h = pose_at(1.0)
        return Pose(x, y, h), False

    def gap(tau: float) -> float:
        x, y, _ = pose_at(tau)
        return _clearance(world_map, x, y) - radius

    n_sub = max(1, math.ceil(travel / _COLLISION_SUBSTEP))
    last_good = 0.0
    first_bad = None
    for k in range(1, n_sub + 1):
        tau = k / n_sub
        if gap(tau) < 0.0:
            first_bad = tau
            break
        last_good = tau

    if first_bad is None:
        x, y, h = pose_at(1.0)
        return Pose(x, y, h), False

    lo, hi = last_good, first_bad
    for _ in range(_BISECT_ITERS):
        mid = (lo + hi) / 2.0
        if gap(mid) < 0.0:
            hi = mid
        else:
            lo = mid
    x, y, h = pose_at(lo)
    return Pose(x, y, h), True


def step_kinematics(state: WorldState, left_speed: float, right_speed: float,
                    dt: float = STEP_DT) -> WorldState:
    """Differential-drive step with exact arc integration and no penetration.

    Wheel speeds outside [-1, 1] are clamped with a warning. On collision the
    robot stops at contact distance and the returned state has contact=True.
    """
    clamped_l = min(1.0, max(-1.0, left_speed))
    clamped_r = min(1.0, max(-1.0, right_speed))
    if clamped_l != left_speed or clamped_r != right_speed:
        log.warning("wheel speeds (%.3f, %.3f) clamped to [-1, 1]",
                    left_speed, right_speed)
    v, omega = wheel_rates(clamped_l, clamped_r, state.body.wheel_base)
    pose, contact = _move_disc(state.map, state.robot, state.body.radius, v, omega, dt)
    return replace(state, robot=pose, tick=state.tick + 1, contact=contact)


def step_prey_kinematics(state: WorldState, left_speed: float, right_speed: float,
                         dt: float = STEP_DT) -> WorldState:
    """Move the prey disc with the same collision rules as the robot."""
    if state.prey is None:
        raise ValueError("world has no prey")
    l = min(1.0, max(-1.0, left_speed))
    r = min(1.0, max(-1.0, right_speed))
    v, omega = wheel_rates(l, r, state.prey.body.wheel_base)
    pose, _ = _move_disc(state.map, state.prey.pose, state.prey.body.radius, v, omega, dt)
    return replace(state, prey=replace(state.prey, pose=pose))


# ---------------------------------------------------------------------------
# Sensing


def ir_readings(world_map: WorldMap, pose: Pose, body: RobotBody,
                prey: PreyState | None = None,
                noise_rng: np.random.Generator | None = None) -> np.ndarray:
    """Normalized closeness readings for each sensor bearing.

    0 means nothing within range, 1 means surface at the robot perimeter.
    """
    segs = world_map.collision_segments
    out = np.zeros(len(body.ir_bearings))
    for i, bearing in enumerate(body.ir_bearings):
        angle = pose.heading + bearing
        dx, dy = math.cos(angle), math.sin(angle)
        ox = pose.x + body.radius * dx
        oy = pose.y + body.radius * dy
        d = ray_segments_hit(ox, oy, dx, dy, segs)
        if prey is not None:
            d = min(d, ray_circle_hit(ox, oy, dx, dy,
                                      prey.pose.x, prey.pose.y, prey.body.radius))
        if d < body.ir_max_range:
            out[i] = 1.0 - d / body.ir_max_range
    if noise_rng is not None:
        out += noise_rng.uniform(-IR_NOISE_AMPLITUDE, IR_NOISE_AMPLITUDE, size=out.shape)
        np.clip(out, 0.0, 1.0, out=out)
    return out


def read_ir(state: WorldState,
            noise_rng: np.random.Generator | None = None) -> np.ndarray:
    """The robot's 8 IR readings; the prey is sensed like any other surface."""
    return ir_readings(state.map, state.robot, state.body,
                       prey=state.prey, noise_rng=noise_rng)


def render_camera(state: WorldState) -> CameraFrame:
    """Project un-eaten food (green) and the prey (red) onto the label grid.

    Entities are drawn back-to-front; an entity whose centre is ray-blocked by
    a wall or obstacle is omitted entirely.
    """
    spec = state.body.camera
    if spec is None:
        raise ValueError("robot body has no camera")
    w, h = spec.width, spec.height
    cells = np.zeros((h, w), dtype=np.uint8)

    entities = [(f.x, f.y, f.radius, GREEN) for f in state.food if not f.eaten]
    if state.prey is not None:
        p = state.prey
        entities.append((p.pose.x, p.pose.y, p.body.radius, RED))
    if not entities:
        return CameraFrame(w, h, cells)

    rx, ry, heading = state.robot.x, state.robot.y, state.robot.heading
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    f_px = spec.focal_px
    segs = state.map.collision_segments

    visible = []
    for ex, ey, radius, color in entities:
        dx, dy = ex - rx, ey - ry
        dist = math.hypot(dx, dy)
        if dist > spec.max_range or dist < 1e-9:
            continue
        forward = dx * cos_h + dy * sin_h
        lateral = -dx * sin_h + dy * cos_h
        if forward <= 1e-9:
            continue
        blocked = ray_segments_hit(rx, ry, dx / dist, dy / dist, segs)
        if blocked < dist - 1e-9:
            continue
        u0 = w / 2.0 - f_px * (lateral / forward)
        # sphere of radius `radius` resting on the ground, centre at z=radius
        v0 = h / 2.0 + f_px * ((spec.mount_height - radius) / forward)
        rho = f_px * radius / dist
        visible.append((dist, u0, v0, rho, color))

    visible.sort(key=lambda e: -e[0])   # paint far to near
    for _, u0, v0, rho, color in visible:
        c_lo = max(0, int(math.floor(u0 - rho)))
        c_hi = min(w - 1, int(math.ceil(u0 + rho)))
        r_lo = max(0, int(math.floor(v0 - rho)))
        r_hi = min(h - 1, int(math.ceil(v0 + rho)))
        if c_lo > c_hi or r_lo > r_hi:
            continue
        cols = np.arange(c_lo, c_hi + 1) + 0.5
        rows = np.arange(r_lo, r_hi + 1) + 0.5
        du = cols[None, :] - u0
        dv = rows[:, None] - v0
        mask = du * du + dv * dv <= rho * rho
        cells[r_lo:r_hi + 1, c_lo:c_hi + 1][mask] = color
    return CameraFrame(w, h, cells)


# ---------------------------------------------------------------------------
# Food placement


def place_food(world_map: WorldMap, count: int, rng: np.random.Generator,
               radius: float = FOOD_RADIUS, min_separation: float = 0.15,
               max_attempts: int = 10_000) -> list[tuple[float, float]]:
    """Rejection-sample food positions in the map's spawn zone.

    Each disc must lie fully inside the arena, clear of every wall and
    obstacle (inflated by the food radius), and at least `min_separation`
    from the robot start and from every other food centre.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    zx, zy, zw, zh = world_map.food_zone
    start = world_map.robot_start
    placed: list[tuple[float, float]] = []
    attempts = 0
    while len(placed) < count:
        if attempts >= max_attempts:
            raise PlacementError(
                f"could not place food {len(placed) + 1}/{count} "
                f"after {max_attempts} attempts in map {world_map.name!r}"
            )
        attempts += 1
        x = zx + rng.random() * zw
        y = zy + rng.random() * zh
        if not (radius <= x <= world_map.arena_w - radius
                and radius <= y <= world_map.arena_h - radius):
            continue
        if world_map.walls.size and \
                float(np.min(point_segments_distance(x, y, world_map.walls))) < radius:
            continue
        if any(point_polygon_distance(x, y, poly) < radius
               for poly in world_map.obstacles):
            continue
        if math.hypot(x - start.x, y - start.y) < min_separation:
            continue
        if any(math.hypot(x - fx, y - fy) < min_separation for fx, fy in placed):
            continue
        placed.append((x, y))
    return placed


def spawn_food(state: WorldState, count: int, rng: np.random.Generator) -> WorldState:
    positions = place_food(state.map, count, rng)
    return replace(state, food=tuple(FoodItem(x, y) for x, y in positions))


# ---------------------------------------------------------------------------
# Map files


def _num(doc: dict, key: str, where: str) -> float:
    if key not in doc:
        raise MapError(f"{where}: missing field {key!r}")
    v = doc[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise MapError(f"{where}.{key}: must be a number")
    if not math.isfinite(v):
        raise MapError(f"{where}.{key}: must be finite")
    return float(v)


def _parse_pose(doc, where: str) -> Pose:
    if not isinstance(doc, dict):
        raise MapError(f"{where}: must be an object")
    return Pose(_num(doc, "x", where), _num(doc, "y", where), _num(doc, "heading", where))


def _check_convex(poly: np.ndarray, where: str) -> None:
    n = len(poly)
    sign = 0
    for i in range(n):
        a, b, c = poly[i], poly[(i + 1) % n], poly[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) < 1e-12:
            raise MapError(f"{where}: degenerate (collinear) vertices")
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            raise MapError(f"{where}: polygon is not convex")


def parse_map(source: Union[str, "IO[str]", dict]) -> WorldMap:
    """Parse and validate a map document (path, text stream or parsed dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise MapError(f"map document: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise MapError("map document: top level must be an object")

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise MapError("map document: field 'name' must be a non-empty string")
    arena = doc.get("arena")
    if not isinstance(arena, dict):
        raise MapError("map document: field 'arena' must be an object")
    aw = _num(arena, "w", "arena")
    ah = _num(arena, "h", "arena")
    if aw <= 0 or ah <= 0:
        raise MapError("arena: dimensions must be positive")

    def inside(x, y):
        return -1e-9 <= x <= aw + 1e-9 and -1e-9 <= y <= ah + 1e-9

    raw_walls = doc.get("walls")
    if not isinstance(raw_walls, list):
        raise MapError("map document: field 'walls' must be an array")
    walls = np.zeros((len(raw_walls), 4))
    for i, seg in enumerate(raw_walls):
        if not (isinstance(seg, list) and len(seg) == 4
                and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                        for v in seg)):
            raise MapError(f"walls[{i}]: must be [x1, y1, x2, y2]")
        if not (inside(seg[0], seg[1]) and inside(seg[2], seg[3])):
            raise MapError(f"walls[{i}]: endpoint outside arena")
        walls[i] = seg

    raw_obstacles = doc.get("obstacles")
    if not isinstance(raw_obstacles, list):
        raise MapError("map document: field 'obstacles' must be an array")
    obstacles: list[np.ndarray] = []
    for i, raw_poly in enumerate(raw_obstacles):
        where = f"obstacles[{i}]"
        if not (isinstance(raw_poly, list) and len(raw_poly) >= 3):
            raise MapError(f"{where}: must be an array of >= 3 [x, y] vertices")
        poly = np.zeros((len(raw_poly), 2))
        for j, vert in enumerate(raw_poly):
            if not (isinstance(vert, list) and len(vert) == 2
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                            for v in vert)):
                raise MapError(f"{where}[{j}]: must be [x, y]")
            if not inside(vert[0], vert[1]):
                raise MapError(f"{where}[{j}]: vertex outside arena")
            poly[j] = vert
        _check_convex(poly, where)
        obstacles.append(poly)

    robot_start = _parse_pose(doc.get("robot_start"), "robot_start")
    if not inside(robot_start.x, robot_start.y):
        raise MapError("robot_start: outside arena")
    default_radius = RobotBody().radius
    for i, poly in enumerate(obstacles):
        if point_polygon_distance(robot_start.x, robot_start.y, poly) < default_radius:
            raise MapError(f"robot_start: intersects obstacles[{i}]")

    zone = doc.get("food_zone")
    if not isinstance(zone, dict):
        raise MapError("map document: field 'food_zone' must be an object")
    fz = (_num(zone, "x", "food_zone"), _num(zone, "y", "food_zone"),
          _num(zone, "w", "food_zone"), _num(zone, "h", "food_zone"))
    if fz[2] < 0 or fz[3] < 0 or not (inside(fz[0], fz[1])
                                      and inside(fz[0] + fz[2], fz[1] + fz[3])):
        raise MapError("food_zone: must lie within the arena")

    prey_start = None
    if doc.get("prey_start") is not None:
        prey_start = _parse_pose(doc["prey_start"], "prey_start")
        if not inside(prey_start.x, prey_start.y):
            raise MapError("prey_start: outside arena")
        for i, poly in enumerate(obstacles):
            if point_polygon_distance(prey_start.x, prey_start.y, poly) < default_radius:
                raise MapError(f"prey_start: intersects obstacles[{i}]")

    return WorldMap(name=name, arena_w=aw, arena_h=ah, walls=walls,
                    obstacles=obstacles, robot_start=robot_start,
                    food_zone=fz, prey_start=prey_start)


def map_to_json(world_map: WorldMap) -> str:
    doc = {
        "name": world_map.name,
        "arena": {"w": world_map.arena_w, "h": world_map.arena_h},
        "walls": [[float(v) for v in seg] for seg in world_map.walls],
        "obstacles": [[[float(x), float(y)] for x, y in poly]
                      for poly in world_map.obstacles],
        "robot_start": {"x": world_map.robot_start.x, "y": world_map.robot_start.y,
                        "heading": world_map.robot_start.heading},
        "food_zone": {"x": world_map.food_zone[0], "y": world_map.food_zone[1],
                      "w": world_map.food_zone[2], "h": world_map.food_zone[3]},
    }
    if world_map.prey_start is not None:
        doc["prey_start"] = {"x": world_map.prey_start.x, "y": world_map.prey_start.y,
                             "heading": world_map.prey_start.heading}
    return json.dumps(doc, indent=2) + "\n"


def builtin_map_path(name: str):
    if name not in BUILTIN_MAP_NAMES:
        raise MapError(f"unknown built-in map {name!r} "
                       f"(have: {', '.join(BUILTIN_MAP_NAMES)})")
    return resources.files("robolearn").joinpath(f"maps/{name}.json")


def builtin_map_bytes(name: str) -> bytes:
    return builtin_map_path(name).read_bytes()


def load_builtin_map(name: str) -> WorldMap:
    return parse_map(json.loads(builtin_map_bytes(name).decode("utf-8")))


def map_source_bytes(name_or_path: str) -> bytes:
    """Raw bytes of a built-in map or a map file path (for checksums)."""
    if name_or_path in BUILTIN_MAP_NAMES:
        return builtin_map_bytes(name_or_path)
    with open(name_or_path, "rb") as fh:
        return fh.read()


def resolve_map(name_or_path: str) -> WorldMap:
    """A built-in map by name, or any map document by file path."""
    if name_or_path in BUILTIN_MAP_NAMES:
        return load_builtin_map(name_or_path)
    if not os.path.exists(name_or_path):
        raise MapError(f"unknown map {name_or_path!r}: not a built-in name "
                       f"({', '.join(BUILTIN_MAP_NAMES)}) and no such file")
    return parse_map(name_or_path)
