"""Frame decoding and the luminosity / hue threshold filters.

Images are held as float64 arrays of shape ``(height, width, 3)`` with every
channel in [0, 1]. Masks are boolean arrays of shape ``(height, width)``.
Row-major order is numpy's native C order, so ``pixels.reshape(-1, 3)`` is the
flat pixel list.

PNG support goes through pypng, which handles every standard colour type,
bit depth and interlacing. Palette images are expanded to RGB, alpha is
dropped, greyscale is replicated to three channels. ``UnsupportedFormat`` is
only raised for a decoded plane count outside 1..4, which pypng should never
produce.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import png

from .errors import DimensionMismatch, MalformedInput, OutOfRange, UnsupportedFormat


def _frozen(arr, dtype):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RgbImage:
    pixels: np.ndarray  # (height, width, 3), float64 in [0, 1]

    def __post_init__(self):
        px = _frozen(self.pixels, np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionMismatch(f"expected (h, w, 3) pixels, got {px.shape}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0 or np.isnan(px).any()):
            raise OutOfRange("RGB channels must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_uint8(cls, arr) -> "RgbImage":
        return cls(np.asarray(arr, dtype=np.float64) / 255.0)


@dataclass(frozen=True, eq=False)
class HsvImage:
    pixels: np.ndarray  # (height, width, 3): hue, saturation, value

    def __post_init__(self):
        px = _frozen(self.pixels, np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionMismatch(f"expected (h, w, 3) pixels, got {px.shape}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0 or np.isnan(px).any()):
            raise OutOfRange("HSV components must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def hue(self) -> np.ndarray:
        return self.pixels[..., 0]

    @property
    def saturation(self) -> np.ndarray:
        return self.pixels[..., 1]

    @property
    def value(self) -> np.ndarray:
        return self.pixels[..., 2]


@dataclass(frozen=True, eq=False)
class MonoMask:
    bits: np.ndarray  # (height, width), bool

    def __post_init__(self):
        bits = _frozen(self.bits, bool)
        if bits.ndim != 2:
            raise DimensionMismatch(f"expected a 2D mask, got shape {bits.shape}")
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MonoMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def count(self) -> int:
        return int(self.bits.sum())


def decode_png(data: bytes) -> RgbImage:
    """Decode PNG bytes into an :class:`RgbImage` with channels scaled to [0, 1].

    8-bit channels are divided by 255, 16-bit by 65535, sub-byte greyscale by
    ``2**depth - 1``.
    """
    try:
        width, height, rows, info = png.Reader(bytes=bytes(data)).asDirect()
        arr = np.vstack([np.asarray(row, dtype=np.float64) for row in rows])
    except (png.Error, ValueError, EOFError, TypeError) as exc:
        raise MalformedInput(f"not a decodable PNG: {exc}") from exc
    planes = info["planes"]
    if planes not in (1, 2, 3, 4):
        raise UnsupportedFormat(f"unexpected plane count {planes}")
    arr = arr.reshape(height, width, planes) / float(2 ** info["bitdepth"] - 1)
    if planes in (1, 2):
        rgb = np.repeat(arr[..., :1], 3, axis=2)
    else:
        rgb = arr[..., :3]
    return RgbImage(rgb)


def encode_png(img: RgbImage | MonoMask, bitdepth: int = 8) -> bytes:
    """Encode an RGB image (or a mask, as black/white greyscale) to PNG bytes."""
    if bitdepth not in (8, 16):
        raise OutOfRange("bitdepth must be 8 or 16")
    scale = 2 ** bitdepth - 1
    dtype = np.uint8 if bitdepth == 8 else np.uint16
    if isinstance(img, MonoMask):
        arr = img.bits.astype(dtype) * dtype(scale)
        greyscale = True
    else:
        arr = np.rint(img.pixels * scale).astype(dtype)
        arr = arr.reshape(img.height, img.width * 3)
        greyscale = False
    writer = png.Writer(width=img.width, height=img.height, greyscale=greyscale, bitdepth=bitdepth)
    buf = io.BytesIO()
    writer.write(buf, arr.tolist())
    return buf.getvalue()


def rgb_to_hsv(img: RgbImage) -> HsvImage:
    """Hexcone RGB to HSV; hue is degrees/360, achromatic pixels get hue 0."""
    rgb = img.pixels
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=2)
    c = v - rgb.min(axis=2)
    chroma = c > 0
    safe_c = np.where(chroma, c, 1.0)

    h = np.zeros_like(v)
    red_max = chroma & (v == r)
    green_max = chroma & (v == g) & ~red_max
    blue_max = chroma & ~red_max & ~green_max
    h = np.where(red_max, ((g - b) / safe_c) % 6.0, h)
    h = np.where(green_max, (b - r) / safe_c + 2.0, h)
    h = np.where(blue_max, (r - g) / safe_c + 4.0, h)
    h = (h / 6.0) % 1.0

    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    return HsvImage(np.stack([h, s, v], axis=2))


def hsv_to_rgb(img: HsvImage) -> RgbImage:
    h, s, v = img.hue, img.saturation, img.value
    sector = np.floor(h * 6.0) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    idx = [sector == k for k in range(6)]
    rgb = np.stack([np.select(idx, choices_r), np.select(idx, choices_g), np.select(idx, choices_b)], axis=2)
    return RgbImage(np.clip(rgb, 0.0, 1.0))


def luminosity_mask(img: HsvImage, value_threshold: float) -> MonoMask:
    """Keep pixels whose value is at or above ``value_threshold``."""
    if not 0.0 <= value_threshold <= 1.0:
        raise OutOfRange(f"value_threshold {value_threshold} outside [0, 1]")
    return MonoMask(img.value >= value_threshold)


def circular_hue_distance(a, b):
    d = np.abs(np.asarray(a, dtype=np.float64) - b) % 1.0
    return np.minimum(d, 1.0 - d)


def hue_mask(img: HsvImage, hue_target: float, hue_threshold: float,
             saturation_min: float = 0.0) -> MonoMask:
    """Keep pixels whose hue lies within ``hue_threshold`` of ``hue_target``.

    Hue distance wraps around the 0/1 seam, so a target of 0.01 matches a hue
    of 0.99. ``saturation_min`` additionally discards washed-out pixels, whose
    hue is meaningless (achromatic pixels carry hue 0).
    """
    if not 0.0 <= hue_target <= 1.0:
        raise OutOfRange(f"hue_target {hue_target} outside [0, 1]")
    if not 0.0 <= hue_threshold <= 0.5:
        raise OutOfRange(f"hue_threshold {hue_threshold} outside [0, 0.5]")
    if not 0.0 <= saturation_min <= 1.0:
        raise OutOfRange(f"saturation_min {saturation_min} outside [0, 1]")
    keep = circular_hue_distance(img.hue, hue_target) <= hue_threshold
    if saturation_min > 0.0:
        keep &= img.saturation >= saturation_min
    return MonoMask(keep)


def mask_and(a: MonoMask, b: MonoMask) -> MonoMask:
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
    return MonoMask(a.bits & b.bits)
