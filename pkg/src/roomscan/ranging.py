"""Camera-rotation triangulation: centring search, one-point calibration, range.

Geometry: the laser beam leaves the diode perpendicular to the camera-laser
baseline. Rotating the camera by ``theta`` until the dot sits on the vertical
centre line of the image closes a right triangle whose far leg is the range,
so ``distance = baseline * sin(pi/2 - theta) / sin(theta)``.

Calibration places the target one unit away and records the centring angle;
the baseline is then ``tan(theta_1)`` in those units, so every later reading
is a proportion of the calibration distance.
"""
from __future__ import annotations

import math
import threading
import weakref
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Protocol

from .detection import DetectionConfig, DotDetection, detect_laser_dot
from .errors import DotLost, NoConvergence, NotFound, OutOfRange
from .imaging import RgbImage, rgb_to_hsv

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class CameraModel:
    image_width: int = 640
    image_height: int = 480
    horizontal_fov: float = math.radians(60.0)
    steps_per_revolution: int = 1600

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise OutOfRange("image dimensions must be positive")
        if not 0.0 < self.horizontal_fov < math.pi:
            raise OutOfRange("horizontal_fov must be in (0, pi)")
        if self.steps_per_revolution < 4:
            raise OutOfRange("steps_per_revolution must be >= 4")

    @property
    def focal_px(self) -> float:
        return (self.image_width / 2) / math.tan(self.horizontal_fov / 2)

    @property
    def step_angle(self) -> float:
        return 2 * math.pi / self.steps_per_revolution


@dataclass(frozen=True)
class RangeModel:
    baseline: float
    calibration_angle: float

    def __post_init__(self):
        if not self.baseline > 0:
            raise OutOfRange("baseline must be positive")
        if not 0.0 < self.calibration_angle < HALF_PI:
            raise OutOfRange("calibration_angle must be in (0, pi/2)")


@dataclass(frozen=True)
class RotationReading:
    step_index: int
    angle: float
    residual_offset_px: float


class FrameSource(Protocol):
    def next_frame(self) -> RgbImage:
        """Block until a frame for the actuator's current step is available."""


class RotationActuator(Protocol):
    @property
    def position(self) -> int:
        """Absolute step index."""

    def step(self, direction: int) -> None:
        """Move one step; ``direction`` is +1 or -1."""


def pixel_offset(dot: DotDetection) -> float:
    """Signed horizontal distance from the image's vertical centre line; positive is right."""
    return dot.centroid[0] - (dot.image_width - 1) / 2


def angle_from_step(step_index: int, cam: CameraModel) -> float:
    return step_index * 2 * math.pi / cam.steps_per_revolution


def calibrate_unit(centering_angle: float) -> RangeModel:
    """Build a range model from the centring angle measured at one unit of distance."""
    if not 0.0 < centering_angle < HALF_PI:
        raise OutOfRange(f"centering angle {centering_angle} outside (0, pi/2)")
    return RangeModel(baseline=math.tan(centering_angle), calibration_angle=centering_angle)


def distance_from_angle(model: RangeModel, angle: float) -> float:
    if not 0.0 < angle < HALF_PI:
        raise OutOfRange(f"angle {angle} outside (0, pi/2)")
    return model.baseline / math.sin(angle) * math.sin(HALF_PI - angle)


def angular_uncertainty(cam: CameraModel) -> float:
    """Worst-case centring-angle error: one stepper step plus half a pixel."""
    return cam.step_angle + math.atan(0.5 / cam.focal_px)


def distance_error_bound(model: RangeModel, cam: CameraModel, distance: float) -> float:
    """Largest range error produced by a centring angle off by ``angular_uncertainty``.

    Returns ``inf`` past the vanishing point, where the lower angle bound hits zero.
    """
    delta = angular_uncertainty(cam)
    alpha = math.atan(model.baseline / distance)
    if alpha - delta <= 0.0:
        return math.inf
    far = model.baseline / math.tan(alpha - delta)
    near = model.baseline / math.tan(min(alpha + delta, HALF_PI))
    return max(far - distance, distance - near)


def max_resolvable_distance(model: RangeModel, cam: CameraModel, rel_tol: float = 1e-6) -> float:
    """Distance at which the centring angle shrinks to the angular uncertainty.

    Past this point the dot sits closer to the vanishing point than one step
    plus half a pixel can resolve, so a reading cannot be told apart from
    infinity. Found by bisection on ``atan(b/d) >= uncertainty``.
    """
    delta = angular_uncertainty(cam)
    b = model.baseline

    def resolvable(d):
        return math.atan(b / d) >= delta

    lo, hi = 0.0, b
    while resolvable(hi):
        lo, hi = hi, hi * 2.0
    if lo == 0.0:
        lo = hi
        while not resolvable(lo):
            hi, lo = lo, lo / 2.0
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if resolvable(mid):
            lo = mid
        else:
            hi = mid
    return lo


_locks_guard = threading.Lock()
_actuator_locks: "weakref.WeakKeyDictionary[object, threading.Lock]" = weakref.WeakKeyDictionary()


@contextmanager
def _exclusive(actuator):
    with _locks_guard:
        lock = _actuator_locks.get(actuator)
        if lock is None:
            lock = _actuator_locks[actuator] = threading.Lock()
    with lock:
        yield


def _observe(frames: FrameSource, cfg: DetectionConfig, max_lost_frames: int) -> float:
    for _ in range(max_lost_frames):
        try:
            dot = detect_laser_dot(rgb_to_hsv(frames.next_frame()), cfg)
        except NotFound:
            continue
        return pixel_offset(dot)
    raise DotLost(f"laser dot missing for {max_lost_frames} consecutive frames")


def center_dot_search(frames: FrameSource, actuator: RotationActuator, cam: CameraModel,
                      cfg: DetectionConfig, max_lost_frames: int = 3,
                      polarity: int = 1) -> RotationReading:
    """Step the camera toward the dot until its offset stops shrinking.

    Steps in the direction that reduces the offset (``polarity`` flips that
    direction for rigs mounted the other way round) and stops when the offset
    changes sign or grows. The actuator is parked on the best step seen.
    Only one search drives a given actuator at a time.
    """
    if max_lost_frames < 1:
        raise OutOfRange("max_lost_frames must be >= 1")
    with _exclusive(actuator):
        off = _observe(frames, cfg, max_lost_frames)
        best_step, best_off = actuator.position, off
        if off != 0.0:
            direction = polarity if off > 0 else -polarity
            prev = off
            steps = 0
            while True:
                if steps >= cam.steps_per_revolution:
                    raise NoConvergence(f"no centring within {steps} steps")
                actuator.step(direction)
                steps += 1
                off = _observe(frames, cfg, max_lost_frames)
                if abs(off) < abs(best_off):
                    best_step, best_off = actuator.position, off
                if off == 0.0 or (off > 0) != (prev > 0) or abs(off) >= abs(prev):
                    break
                prev = off
            while actuator.position != best_step:
                actuator.step(1 if best_step > actuator.position else -1)
        return RotationReading(best_step, angle_from_step(best_step, cam), best_off)
