"""Small 2D helpers shared by the planner and the simulator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2 * math.pi
EPS = 1e-9


def normalize_angle(a: float) -> float:
    """Wrap to [0, 2*pi)."""
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    # fmod of a tiny negative can round up to exactly 2*pi
    return 0.0 if a >= TWO_PI else a


def angle_diff(a: float, b: float) -> float:
    """Unsigned smallest difference between two headings, in [0, pi]."""
    d = abs(math.fmod(a - b, TWO_PI))
    return TWO_PI - d if d > math.pi else d


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def xy(self) -> tuple[float, float]:
        return self.x, self.y

    def advanced(self, distance: float) -> "Pose":
        return Pose(self.x + distance * math.cos(self.heading),
                    self.y + distance * math.sin(self.heading), self.heading)

    def turned(self, dheading: float) -> "Pose":
        return Pose(self.x, self.y, self.heading + dheading)

    def distance_to(self, other) -> float:
        ox, oy = other.xy if isinstance(other, Pose) else other
        return math.hypot(self.x - ox, self.y - oy)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def contact_interval(p, q, a, b, eps: float = EPS):
    """Parameter range ``(t0, t1)`` along ``p -> q`` where it touches segment ``a-b``.

    ``t`` runs from 0 at ``p`` to 1 at ``q``. Returns ``None`` when the
    segments are disjoint. Collinear overlaps give a proper interval,
    transversal contacts a single point. ``eps`` is a length tolerance.
    """
    rx, ry = q[0] - p[0], q[1] - p[1]
    sx, sy = b[0] - a[0], b[1] - a[1]
    rlen = math.hypot(rx, ry)
    slen = math.hypot(sx, sy)
    if rlen == 0:
        raise ValueError("zero-length segment")
    wx, wy = a[0] - p[0], a[1] - p[1]
    denom = _cross(rx, ry, sx, sy)
    tt = eps / rlen
    if slen > 0 and abs(denom) > EPS * rlen * slen:
        t = _cross(wx, wy, sx, sy) / denom
        u = _cross(wx, wy, rx, ry) / denom
        tu = eps / slen
        if -tt <= t <= 1 + tt and -tu <= u <= 1 + tu:
            t = min(max(t, 0.0), 1.0)
            return t, t
        return None
    # parallel (or a-b degenerate): only collinear contact counts
    if abs(_cross(wx, wy, rx, ry)) / rlen > eps:
        return None
    ta = (wx * rx + wy * ry) / (rlen * rlen)
    tb = ((b[0] - p[0]) * rx + (b[1] - p[1]) * ry) / (rlen * rlen)
    lo, hi = max(min(ta, tb), 0.0), min(max(ta, tb), 1.0)
    if lo > hi + tt:
        return None
    return lo, max(lo, hi)


def segments_intersect(p, q, a, b, eps: float = EPS) -> bool:
    return contact_interval(p, q, a, b, eps) is not None


def point_segment_distance(pt, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    l2 = dx * dx + dy * dy
    if l2 == 0:
        return math.hypot(pt[0] - ax, pt[1] - ay)
    t = ((pt[0] - ax) * dx + (pt[1] - ay) * dy) / l2
    t = min(max(t, 0.0), 1.0)
    return math.hypot(pt[0] - ax - t * dx, pt[1] - ay - t * dy)


def points_segment_distances(px: np.ndarray, py: np.ndarray, a, b) -> np.ndarray:
    """Vectorised :func:`point_segment_distance` over many points."""
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    l2 = dx * dx + dy * dy
    if l2 == 0:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / l2, 0.0, 1.0)
    return np.hypot(px - ax - t * dx, py - ay - t * dy)
