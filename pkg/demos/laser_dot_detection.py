"""Finding a laser dot in a camera frame.

Walks through the detection pipeline on a synthetic frame that contains a
green dot and a flat reflection of it, the way a glossy floor would show one.
Writes the frame and the combined filter mask as PNGs next to the script.
"""
from pathlib import Path

import numpy as np

from roomscan.detection import (DetectionConfig, centroid, circle_ratio, detect_laser_dot, detection_mask, find_blobs,
                                reject_ovals)
from roomscan.imaging import encode_png, hue_mask, luminosity_mask, rgb_to_hsv
from roomscan.ranging import pixel_offset
from roomscan.simworld import Reflection, SceneParams, dot_column, render_dot_frame

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

# A 640x480 frame: dark background, a 4 px green dot for a target one unit
# away, and a 30x8 px reflection 40 px to its left.
scene = SceneParams(reflection=Reflection(offset_px=-40, width_px=30, height_px=8),
                    noise_fraction=0.01, noise_seed=7)
frame = render_dot_frame(1.0, 0.0, scene)
(out / "frame.png").write_bytes(encode_png(frame))

# Detection works in HSV. Value picks out bright pixels, hue keeps the
# laser colour. Sparse noise specks stay below the value threshold.
hsv = rgb_to_hsv(frame)
cfg = DetectionConfig()
bright = luminosity_mask(hsv, cfg.value_threshold)
green = hue_mask(hsv, cfg.hue_target, cfg.hue_threshold, cfg.saturation_min)
print(f"bright pixels: {bright.count()}, green pixels: {green.count()}")

mask = detection_mask(hsv, cfg)
(out / "mask.png").write_bytes(encode_png(mask))
print(f"combined mask: {mask.count()} pixels")

# Label 4-connected blobs. Both the dot and its reflection survive the size filter.
blobs = find_blobs(mask, cfg.min_blob_size)
for b in blobs:
    print(f"  blob at {centroid(b)}: {b.size} px, circle ratio {circle_ratio(b):.2f}")

# A reflection is stretched sideways, so its bounding box is far from square.
kept = reject_ovals(blobs, cfg.min_circle_ratio)
print(f"{len(blobs)} blobs before oval rejection, {len(kept)} after")

dot = detect_laser_dot(hsv, cfg)
truth = dot_column(1.0, 0.0, scene)
print(f"dot centroid x = {dot.centroid[0]:.3f} (rendered at {truth:.3f})")
print(f"offset from the image centre line: {pixel_offset(dot):+.3f} px")

# The mask PNG is exactly the boolean mask.
assert np.array_equal(mask.bits, detection_mask(hsv, cfg).bits)
print(f"wrote {out / 'frame.png'} and {out / 'mask.png'}")
