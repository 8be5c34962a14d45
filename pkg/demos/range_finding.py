"""Measuring distance by rotating the camera until the laser dot is centred.

The laser fires straight ahead, parallel to the camera's rest axis and a
small baseline to the side. The nearer the target, the further the camera
has to turn to bring the dot onto the image centre line. One calibration
at a known unit distance fixes the baseline in those units.
"""
import math

from roomscan.detection import DetectionConfig
from roomscan.ranging import (CameraModel, calibrate_unit, center_dot_search, distance_error_bound,
                              distance_from_angle, max_resolvable_distance)
from roomscan.simworld import SceneParams, SimulatedRig, target_world

cam = CameraModel()  # 640x480, 60 degree field of view, 1600 steps per turn
scene = SceneParams(camera=cam, baseline=0.1)
cfg = DetectionConfig()


def centre_on(distance):
    world, pose = target_world(distance)
    rig = SimulatedRig(world, pose, scene)
    reading = center_dot_search(rig, rig, cam, cfg)
    return reading, rig.frames_served


# Calibrate with the target one unit away.
cal, frames = centre_on(1.0)
model = calibrate_unit(cal.angle)
print(f"calibration: step {cal.step_index}, angle {math.degrees(cal.angle):.3f} deg, "
      f"{frames} frames, baseline {model.baseline:.5f} units (true 0.1)")

# Measure a few distances with that model.
print(f"{'true':>6} {'step':>5} {'estimate':>9} {'bound':>8}")
for d in (0.5, 2.0, 4.0, 8.0):
    reading, _ = centre_on(d)
    est = distance_from_angle(model, reading.angle)
    print(f"{d:6.2f} {reading.step_index:5d} {est:9.4f} {distance_error_bound(model, cam, est):8.4f}")

# Far targets barely move the dot. Past this distance one stepper step plus
# half a pixel of centring error swamps the whole centring angle.
print(f"max resolvable distance: {max_resolvable_distance(model, cam):.2f} units")
for label, better in (("double width", CameraModel(1280, 480, cam.horizontal_fov, 1600)),
                      ("double steps", CameraModel(640, 480, cam.horizontal_fov, 3200))):
    print(f"  with {label}: {max_resolvable_distance(model, better):.2f} units")
