"""Deterministic 2D test world.

Coordinates are world units with y pointing up; headings are radians
counter-clockwise from +x. Obstacles are axis-aligned rectangles and the
perimeter is an implicit wall.

World documents are JSON::

    {"width": 64, "height": 64,
     "obstacles": [{"x": 10, "y": 12, "w": 6, "h": 4}, ...],
     "start": {"x": 60, "y": 4, "heading": 3.14159}}

An obstacle may carry ``"type": "rect"`` (the default). ``"polygon"`` is
reserved and rejected for now. ``start`` is optional; without it runs begin
at the free spot nearest the lower-right corner.
"""
from __future__ import annotations

import colorsys
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import OriginInsideObstacle, ParseError, ValidationError
from .geometry import EPS, Pose, points_segment_distances
from .imaging import RgbImage
from .ranging import CameraModel, angle_from_step


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def x1(self) -> float:
        return self.x + self.w

    @property
    def y1(self) -> float:
        return self.y + self.h

    def contains(self, px, py) -> bool:
        """Strict interior test; the rectangle's edge counts as free space."""
        return self.x < px < self.x1 and self.y < py < self.y1


@dataclass(frozen=True)
class World:
    width: float
    height: float
    obstacles: tuple[Rect, ...] = ()
    start: Pose | None = None

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not (self.width > 0 and self.height > 0):
            raise ValidationError("world width and height must be positive")
        for i, r in enumerate(self.obstacles):
            if r.w <= 0 or r.h <= 0:
                raise ValidationError(f"obstacle {i} has non-positive size")
            if r.x < 0 or r.y < 0 or r.x1 > self.width or r.y1 > self.height:
                raise ValidationError(f"obstacle {i} lies outside the world bounds")
        if _union_area(self.obstacles) >= self.width * self.height * (1 - 1e-12):
            raise ValidationError("obstacles leave no free space")
        if self.start is not None and not self.is_free(self.start.x, self.start.y):
            raise ValidationError("start pose is not in free space")

    def is_free(self, x: float, y: float) -> bool:
        if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
            return False
        return not any(r.contains(x, y) for r in self.obstacles)

    def clearance(self, x: float, y: float) -> float:
        """Distance from a free point to the nearest obstacle or wall."""
        best = min(x, y, self.width - x, self.height - y)
        for r in self.obstacles:
            dx = max(r.x - x, 0.0, x - r.x1)
            dy = max(r.y - y, 0.0, y - r.y1)
            best = min(best, math.hypot(dx, dy))
        return best


def _union_area(rects: Sequence[Rect]) -> float:
    if not rects:
        return 0.0
    xs = sorted({v for r in rects for v in (r.x, r.x1)})
    ys = sorted({v for r in rects for v in (r.y, r.y1)})
    area = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        for y0, y1 in zip(ys, ys[1:]):
            cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
            if any(r.x <= cx <= r.x1 and r.y <= cy <= r.y1 for r in rects):
                area += (x1 - x0) * (y1 - y0)
    return area


# -- loading ---------------------------------------------------------------

def _number(doc, key, where):
    if key not in doc:
        raise ParseError(f"missing {key!r} in {where}", field=key)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ParseError(f"{key!r} in {where} must be a finite number, got {v!r}", field=key)
    return float(v)


def load_world(text: str) -> World:
    """Parse and validate a world document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("world document must be an object")
    width = _number(doc, "width", "world")
    height = _number(doc, "height", "world")
    if width <= 0:
        raise ParseError("width must be positive", field="width")
    if height <= 0:
        raise ParseError("height must be positive", field="height")
    raw = doc.get("obstacles", [])
    if not isinstance(raw, list):
        raise ParseError("obstacles must be a list", field="obstacles")
    rects = []
    for i, ob in enumerate(raw):
        where = f"obstacles[{i}]"
        if not isinstance(ob, dict):
            raise ParseError(f"{where} must be an object", field=where)
        kind = ob.get("type", "rect")
        if kind == "polygon":
            raise ValidationError(f"{where}: polygon obstacles are not supported yet")
        if kind != "rect":
            raise ParseError(f"{where}: unknown obstacle type {kind!r}", field=f"{where}.type")
        rects.append(Rect(*(_number(ob, k, where) for k in ("x", "y", "w", "h"))))
    start = None
    if "start" in doc:
        st = doc["start"]
        if not isinstance(st, dict):
            raise ParseError("start must be an object", field="start")
        start = Pose(_number(st, "x", "start"), _number(st, "y", "start"),
                     _number(st, "heading", "start") if "heading" in st else 0.0)
    return World(width, height, tuple(rects), start)


def dump_world(world: World) -> str:
    doc = {"width": world.width, "height": world.height,
           "obstacles": [{"x": r.x, "y": r.y, "w": r.w, "h": r.h} for r in world.obstacles]}
    if world.start is not None:
        doc["start"] = {"x": world.start.x, "y": world.start.y, "heading": world.start.heading}
    return json.dumps(doc, indent=2) + "\n"


def load_fixture(name: str) -> World:
    """Load one of the bundled worlds (``figure6``, ``trap``, ``empty``)."""
    from importlib import resources

    text = resources.files("roomscan").joinpath("data", "worlds", f"{name}.json").read_text()
    return load_world(text)


# -- raycasting and motion -------------------------------------------------

def _slab(o, d, lo, hi):
    """Entry/exit parameters of a ray against one axis slab."""
    if d == 0.0:
        if lo < o < hi:
            return -math.inf, math.inf
        return math.inf, -math.inf
    t0, t1 = (lo - o) / d, (hi - o) / d
    return (t0, t1) if t0 <= t1 else (t1, t0)


def _ray_box(ox, oy, dx, dy, x0, y0, x1, y1) -> float:
    """First non-negative hit of a ray with a closed box, ``inf`` on a miss.

    A ray starting on the box surface and pointing outward is a miss.
    """
    ax0, ax1 = _slab(ox, dx, x0, x1)
    ay0, ay1 = _slab(oy, dy, y0, y1)
    t_in, t_out = max(ax0, ay0), min(ax1, ay1)
    if t_in > t_out or t_out <= EPS:
        return math.inf
    return max(t_in, 0.0)


def _wall_distance(ox, oy, dx, dy, x0, y0, x1, y1) -> float:
    """Distance along a ray from inside a box to its boundary."""
    t = math.inf
    if dx > 0:
        t = min(t, (x1 - ox) / dx)
    elif dx < 0:
        t = min(t, (x0 - ox) / dx)
    if dy > 0:
        t = min(t, (y1 - oy) / dy)
    elif dy < 0:
        t = min(t, (y0 - oy) / dy)
    return max(t, 0.0)


def raycast(world: World, origin, heading: float) -> float:
    """Exact distance from ``origin`` to the first obstacle or wall along ``heading``."""
    ox, oy = origin
    if not world.is_free(ox, oy):
        raise OriginInsideObstacle(f"origin ({ox}, {oy}) is not in free space")
    dx, dy = math.cos(heading), math.sin(heading)
    best = _wall_distance(ox, oy, dx, dy, 0.0, 0.0, world.width, world.height)
    for r in world.obstacles:
        best = min(best, _ray_box(ox, oy, dx, dy, r.x, r.y, r.x1, r.y1))
    return best


def _ray_circle(ox, oy, dx, dy, cx, cy, radius) -> float:
    fx, fy = ox - cx, oy - cy
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - c
    if disc <= 0.0:
        return math.inf
    root = math.sqrt(disc)
    t_in, t_out = -b - root, -b + root
    if t_out <= EPS:
        return math.inf
    return max(t_in, 0.0)


def free_travel(world: World, pose: Pose, robot_radius: float) -> float:
    """How far a disc of ``robot_radius`` can slide along ``pose.heading``."""
    ox, oy = pose.x, pose.y
    dx, dy = math.cos(pose.heading), math.sin(pose.heading)
    rr = robot_radius
    best = _wall_distance(ox, oy, dx, dy, rr, rr, world.width - rr, world.height - rr)
    for r in world.obstacles:
        # Minkowski sum of box and disc: two crossed boxes plus four corner discs
        best = min(best,
                   _ray_box(ox, oy, dx, dy, r.x - rr, r.y, r.x1 + rr, r.y1),
                   _ray_box(ox, oy, dx, dy, r.x, r.y - rr, r.x1, r.y1 + rr))
        if rr > 0:
            for cx, cy in ((r.x, r.y), (r.x1, r.y), (r.x, r.y1), (r.x1, r.y1)):
                best = min(best, _ray_circle(ox, oy, dx, dy, cx, cy, rr))
    return best


def move_robot(world: World, pose: Pose, distance: float, robot_radius: float = 0.0) -> Pose:
    """Translate along the heading, stopping where the robot disc would touch an obstacle."""
    if distance <= 0.0:
        return pose
    return pose.advanced(min(distance, free_travel(world, pose, robot_radius)))


# -- camera rendering ------------------------------------------------------

@dataclass(frozen=True)
class Reflection:
    offset_px: float  # horizontal offset from the dot centre
    width_px: float
    height_px: float


@dataclass(frozen=True)
class SceneParams:
    camera: CameraModel = field(default_factory=CameraModel)
    baseline: float = 0.1
    dot_radius_px: float = 4.0
    dot_hue: float = 1.0 / 3.0
    dot_saturation: float = 1.0
    dot_value: float = 1.0
    background_value: float = 0.1
    reflection: Reflection | None = None
    noise_seed: int = 0
    noise_fraction: float = 0.0
    noise_max_value: float = 0.5

    def __post_init__(self):
        if not self.dot_value > self.background_value:
            raise ValidationError("dot_value must exceed background_value")
        if self.baseline <= 0:
            raise ValidationError("baseline must be positive")


def dot_column(distance: float, camera_rotation: float, scene: SceneParams) -> float:
    """Image column of the laser dot for a target ``distance`` away."""
    cam = scene.camera
    alpha = math.atan2(scene.baseline, distance)
    return (cam.image_width - 1) / 2 + cam.focal_px * math.tan(alpha - camera_rotation)


def render_dot_frame(distance: float, camera_rotation: float, scene: SceneParams) -> RgbImage:
    """Synthetic camera frame for a target straight ahead at ``distance``.

    The dot has hard edges so its pixel centroid is exactly computable. A dot
    whose centre falls outside the image is simply not drawn.
    """
    cam = scene.camera
    h, w = cam.image_height, cam.image_width
    img = np.full((h, w, 3), scene.background_value, dtype=np.float64)

    if scene.noise_fraction > 0:
        rng = np.random.default_rng(scene.noise_seed)
        speck = rng.random((h, w)) < scene.noise_fraction
        img[speck] = rng.random((int(speck.sum()), 1)) * scene.noise_max_value

    color = colorsys.hsv_to_rgb(scene.dot_hue % 1.0, scene.dot_saturation, scene.dot_value)
    cx = dot_column(distance, camera_rotation, scene)
    cy = (h - 1) / 2
    if 0.0 <= cx <= w - 1:
        _fill_ellipse(img, cx, cy, scene.dot_radius_px, scene.dot_radius_px, color)
        if scene.reflection is not None:
            ref = scene.reflection
            _fill_ellipse(img, cx + ref.offset_px, cy, ref.width_px / 2, ref.height_px / 2, color)
    return RgbImage(img)


def _fill_ellipse(img, cx, cy, ax, ay, color):
    """Paint pixels whose centres fall inside the axis-aligned ellipse."""
    h, w = img.shape[:2]
    x0, x1 = max(int(math.floor(cx - ax)), 0), min(int(math.ceil(cx + ax)), w - 1)
    y0, y1 = max(int(math.floor(cy - ay)), 0), min(int(math.ceil(cy + ay)), h - 1)
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    inside = ((xs - cx) / ax) ** 2 + ((ys - cy) / ay) ** 2 <= 1.0
    img[y0:y1 + 1, x0:x1 + 1][inside] = color


def render_frame(world: World, pose: Pose, camera_rotation: float, scene: SceneParams) -> RgbImage:
    """Frame seen by the robot's camera with the laser aimed along ``pose.heading``."""
    return render_dot_frame(raycast(world, pose.xy, pose.heading), camera_rotation, scene)


def target_world(distance: float, height: float = 2.0) -> tuple[World, Pose]:
    """Empty world with a wall exactly ``distance`` in front of the returned pose."""
    return World(distance + 1.0, height), Pose(1.0, height / 2, 0.0)


class SimulatedRig:
    """Stepper-mounted camera looking at the laser dot in a simulated world.

    Implements both the frame-source and rotation-actuator interfaces.
    """

    def __init__(self, world: World, pose: Pose, scene: SceneParams, start_step: int = 0):
        self.world = world
        self.pose = pose
        self.scene = scene
        self._position = start_step
        self._distance = raycast(world, pose.xy, pose.heading)
        self.frames_served = 0

    @property
    def position(self) -> int:
        return self._position

    def step(self, direction: int) -> None:
        if direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        self._position += direction

    def next_frame(self) -> RgbImage:
        self.frames_served += 1
        rot = angle_from_step(self._position, self.scene.camera)
        return render_dot_frame(self._distance, rot, self.scene)


class SimRobot:
    """Range sensor plus motion for the planner, backed by exact raycasts."""

    def __init__(self, world: World, pose: Pose, robot_radius: float, sensor_max: float = math.inf):
        if not world.is_free(pose.x, pose.y) or world.clearance(pose.x, pose.y) < robot_radius - EPS:
            raise OriginInsideObstacle("robot does not fit at its start pose")
        self.world = world
        self.robot_radius = robot_radius
        self.sensor_max = sensor_max
        self._pose = pose

    @property
    def pose(self) -> Pose:
        return self._pose

    def distance(self, pose: Pose, heading: float) -> float:
        return min(raycast(self.world, pose.xy, heading), self.sensor_max)

    def forward(self, distance: float) -> Pose:
        self._pose = move_robot(self.world, self._pose, distance, self.robot_radius)
        return self._pose

    def rotate(self, dheading: float) -> Pose:
        self._pose = self._pose.turned(dheading)
        return self._pose


# -- coverage --------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    covered_cells: int
    free_cells: int
    fraction: float
    cell_size: float


def cell_centers(world: World, cell_size: float):
    nx = int(math.floor(world.width / cell_size + 1e-9))
    ny = int(math.floor(world.height / cell_size + 1e-9))
    xs = (np.arange(nx) + 0.5) * cell_size
    ys = (np.arange(ny) + 0.5) * cell_size
    gx, gy = np.meshgrid(xs, ys)
    free = np.ones(gx.shape, dtype=bool)
    for r in world.obstacles:
        free &= ~((gx > r.x) & (gx < r.x1) & (gy > r.y) & (gy < r.y1))
    return gx, gy, free


def _simplify(points):
    """Drop repeated points and interior points of straight runs."""
    out = []
    for p in points:
        if out and abs(p[0] - out[-1][0]) < 1e-12 and abs(p[1] - out[-1][1]) < 1e-12:
            continue
        if len(out) >= 2:
            (ax, ay), (bx, by) = out[-2], out[-1]
            ux, uy, vx, vy = bx - ax, by - ay, p[0] - bx, p[1] - by
            if abs(ux * vy - uy * vx) < 1e-9 and ux * vx + uy * vy > 0:
                out[-1] = p
                continue
        out.append(p)
    return out


def coverage(world: World, path: Sequence[Pose], robot_radius: float, cell_size: float = 1.0) -> CoverageReport:
    """Share of free cells whose centre lies within ``robot_radius`` of the path."""
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    gx, gy, free = cell_centers(world, cell_size)
    px, py = gx[free], gy[free]
    covered = np.zeros(px.shape, dtype=bool)
    pts = _simplify([p.xy if isinstance(p, Pose) else tuple(p) for p in path])
    if len(pts) == 1:
        covered |= np.hypot(px - pts[0][0], py - pts[0][1]) <= robot_radius
    for a, b in zip(pts, pts[1:]):
        covered |= points_segment_distances(px, py, a, b) <= robot_radius
    n_free = int(free.sum())
    n_cov = int(covered.sum())
    return CoverageReport(n_cov, n_free, n_cov / n_free if n_free else 0.0, cell_size)


# -- path rendering --------------------------------------------------------

OBSTACLE_GREY = (128, 128, 128)
PATH_YELLOW = (255, 215, 0)
START_RED = (220, 40, 40)


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(world: World, runs: Sequence, scale: float = 8.0) -> bytes:
    w, h = world.width * scale, world.height * scale

    def pt(x, y):
        return f"{_fmt(x * scale)},{_fmt((world.height - y) * scale)}"

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(w)}" height="{_fmt(h)}" '
        f'viewBox="0 0 {_fmt(w)} {_fmt(h)}">',
        f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="black"/>',
    ]
    for r in world.obstacles:
        lines.append(f'<rect x="{_fmt(r.x * scale)}" y="{_fmt((world.height - r.y1) * scale)}" '
                     f'width="{_fmt(r.w * scale)}" height="{_fmt(r.h * scale)}" fill="rgb(128,128,128)"/>')
    for run in runs:
        pts = _simplify([p.xy for p in run.path])
        if len(pts) >= 2:
            lines.append('<polyline fill="none" stroke="rgb(255,215,0)" stroke-width="2" points="'
                         + " ".join(pt(x, y) for x, y in pts) + '"/>')
    for run in runs:
        if run.path:
            s = run.path[0]
            lines.append(f'<circle cx="{_fmt(s.x * scale)}" cy="{_fmt((world.height - s.y) * scale)}" '
                         f'r="{_fmt(scale * 0.75)}" fill="rgb(220,40,40)"/>')
    lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("ascii")


def render_ppm(world: World, runs: Sequence, scale: float = 1.0) -> bytes:
    """P6 raster, ``ceil(width*scale)`` by ``ceil(height*scale)`` pixels."""
    nx, ny = int(math.ceil(world.width * scale)), int(math.ceil(world.height * scale))
    img = np.zeros((ny, nx, 3), dtype=np.uint8)
    # pixel centres in world coordinates, row 0 at the top
    xs = (np.arange(nx) + 0.5) / scale
    ys = world.height - (np.arange(ny) + 0.5) / scale
    gx, gy = np.meshgrid(xs, ys)
    for r in world.obstacles:
        img[(gx >= r.x) & (gx <= r.x1) & (gy >= r.y) & (gy <= r.y1)] = OBSTACLE_GREY
    half_px = 0.5 / scale
    for run in runs:
        pts = _simplify([p.xy for p in run.path])
        for a, b in zip(pts, pts[1:]):
            img[points_segment_distances(gx, gy, a, b) <= half_px] = PATH_YELLOW
        if pts:
            sx, sy = pts[0]
            img[np.hypot(gx - sx, gy - sy) <= max(0.75, half_px)] = START_RED
    return f"P6\n{nx} {ny}\n255\n".encode("ascii") + img.tobytes()


def render_paths(world: World, runs: Sequence, fmt: str = "svg", scale: float | None = None) -> bytes:
    """Draw obstacles in grey and each run's path in yellow, as SVG or PPM bytes."""
    fmt = fmt.lower()
    if fmt == "svg":
        return render_svg(world, runs, 8.0 if scale is None else scale)
    if fmt == "ppm":
        return render_ppm(world, runs, 1.0 if scale is None else scale)
    raise ValueError(f"unknown format {fmt!r}")


# -- random worlds ---------------------------------------------------------

def random_world(seed: int, size: float = 64.0, n_min: int = 5, n_max: int = 20,
                 min_side: float = 2.0, max_side: float = 12.0) -> World:
    """Square world with a seeded number of random rectangular obstacles."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    rects = []
    for _ in range(n):
        w, h = rng.uniform(min_side, max_side, size=2)
        x = rng.uniform(0, size - w)
        y = rng.uniform(0, size - h)
        rects.append(Rect(round(float(x), 3), round(float(y), 3), round(float(w), 3), round(float(h), 3)))
    return World(size, size, tuple(rects))


def find_start(world: World, robot_radius: float, corner=(1.0, 0.0), margin: float = 0.5) -> Pose:
    """Free pose nearest to a corner (default lower-right), facing into the room.

    ``corner`` is given as fractions of width and height.
    """
    need = robot_radius + margin
    target = np.array([corner[0] * world.width, corner[1] * world.height])
    gx, gy, _ = cell_centers(world, 0.5)
    order = np.argsort(np.hypot(gx - target[0], gy - target[1]), axis=None)
    for idx in order:
        x, y = float(gx.flat[idx]), float(gy.flat[idx])
        if world.is_free(x, y) and world.clearance(x, y) >= need:
            heading = math.atan2(world.height / 2 - y, world.width / 2 - x)
            # face along the nearest wall toward the room interior
            return Pose(x, y, round(heading / (math.pi / 2)) * (math.pi / 2))
    raise ValidationError("no start position with enough clearance")
