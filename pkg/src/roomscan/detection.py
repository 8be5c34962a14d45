"""Blob extraction, oval rejection and laser-dot localisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NotFound, OutOfRange
from .imaging import HsvImage, MonoMask, hue_mask, luminosity_mask, mask_and

# 4-connectivity: no diagonal neighbours.
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True, eq=False)
class Blob:
    """A 4-connected group of mask pixels.

    ``coords`` is an ``(n, 2)`` int array of ``(x, y)`` = (column, row) pairs in
    row-major scan order.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.int64).reshape(-1, 2)
        if len(coords) == 0:
            raise ValueError("a blob needs at least one pixel")
        order = np.lexsort((coords[:, 0], coords[:, 1]))
        coords = coords[order]
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def _presorted(cls, coords: np.ndarray) -> "Blob":
        """Skip validation and sorting for coordinates already in row-major order."""
        blob = object.__new__(cls)
        coords.setflags(write=False)
        object.__setattr__(blob, "coords", coords)
        return blob

    @property
    def size(self) -> int:
        return len(self.coords)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(min_x, min_y, max_x, max_y), inclusive."""
        lo = self.coords.min(axis=0)
        hi = self.coords.max(axis=0)
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    def pixel_set(self) -> frozenset:
        xs, ys = self.coords.T.tolist()
        return frozenset(zip(xs, ys))

    def __eq__(self, other):
        if not isinstance(other, Blob):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


@dataclass(frozen=True)
class DetectionConfig:
    value_threshold: float = 0.8
    hue_target: float = 1.0 / 3.0
    hue_threshold: float = 0.08
    saturation_min: float = 0.3
    min_blob_size: int = 4
    min_circle_ratio: float = 0.75

    def __post_init__(self):
        if not 0.0 <= self.value_threshold <= 1.0:
            raise OutOfRange("value_threshold must be in [0, 1]")
        if not 0.0 <= self.hue_target <= 1.0:
            raise OutOfRange("hue_target must be in [0, 1]")
        if not 0.0 <= self.hue_threshold <= 0.5:
            raise OutOfRange("hue_threshold must be in [0, 0.5]")
        if not 0.0 <= self.saturation_min <= 1.0:
            raise OutOfRange("saturation_min must be in [0, 1]")
        if self.min_blob_size < 1:
            raise OutOfRange("min_blob_size must be >= 1")
        if not 0.0 < self.min_circle_ratio <= 1.0:
            raise OutOfRange("min_circle_ratio must be in (0, 1]")


@dataclass(frozen=True)
class DotDetection:
    centroid: tuple[float, float]
    blob: Blob
    image_width: int
    image_height: int


def find_blobs(mask: MonoMask, min_blob_size: int = 1) -> list[Blob]:
    """All maximal 4-connected components with at least ``min_blob_size`` pixels.

    Blobs come back ordered by the first pixel met in a row-major scan.
    """
    if min_blob_size < 1:
        raise OutOfRange("min_blob_size must be >= 1")
    labels, n = ndimage.label(mask.bits, structure=_CROSS)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)  # already row-major
    lab = labels[ys, xs]
    order = np.argsort(lab, kind="stable")
    lab_sorted = lab[order]
    splits = np.flatnonzero(np.diff(lab_sorted)) + 1
    groups = np.split(order, splits)
    # first flat index of each component decides output order
    groups.sort(key=lambda g: g[0])
    pts = np.column_stack([xs, ys]).astype(np.int64)
    return [Blob._presorted(pts[g]) for g in groups if len(g) >= min_blob_size]


def circle_ratio(blob: Blob) -> float:
    """Short side over long side of the inclusive bounding box; 1.0 is square."""
    min_x, min_y, max_x, max_y = blob.bbox
    w = max_x - min_x + 1
    h = max_y - min_y + 1
    return min(w, h) / max(w, h)


def reject_ovals(blobs: list[Blob], min_circle_ratio: float) -> list[Blob]:
    if not 0.0 < min_circle_ratio <= 1.0:
        raise OutOfRange("min_circle_ratio must be in (0, 1]")
    return [b for b in blobs if circle_ratio(b) >= min_circle_ratio]


def centroid(blob: Blob) -> tuple[float, float]:
    # integer sums are exact, so the only rounding is the final division
    sx, sy = blob.coords.sum(axis=0)
    n = blob.size
    return int(sx) / n, int(sy) / n


def detection_mask(img: HsvImage, cfg: DetectionConfig) -> MonoMask:
    """Luminosity mask AND hue mask, the input to blob detection."""
    lum = luminosity_mask(img, cfg.value_threshold)
    hue = hue_mask(img, cfg.hue_target, cfg.hue_threshold, cfg.saturation_min)
    return mask_and(lum, hue)


def pick_dot(blobs: list[Blob]) -> Blob:
    """Largest blob; ties go to the rounder one, then to scan order."""
    if not blobs:
        raise NotFound("no laser dot detected")
    best = blobs[0]
    for b in blobs[1:]:
        if (b.size, circle_ratio(b)) > (best.size, circle_ratio(best)):
            best = b
    return best


def detect_laser_dot(img: HsvImage, cfg: DetectionConfig) -> DotDetection:
    """Run the full filter chain and return the surviving dot.

    Raises :class:`NotFound` when every blob was filtered out.
    """
    mask = detection_mask(img, cfg)
    blobs = reject_ovals(find_blobs(mask, cfg.min_blob_size), cfg.min_circle_ratio)
    dot = pick_dot(blobs)
    return DotDetection(centroid(dot), dot, img.width, img.height)
