"""Laser-dot optical range finding and six-direction room traversal."""

__version__ = "0.1.0"

from .detection import (Blob, DetectionConfig, DotDetection, centroid, circle_ratio,  # noqa: E402
                        detect_laser_dot, find_blobs, reject_ovals)
from .geometry import Pose  # noqa: E402
from .imaging import (HsvImage, MonoMask, RgbImage, decode_png, encode_png, hue_mask,  # noqa: E402
                      luminosity_mask, mask_and, rgb_to_hsv)
from .planner import (BounceConfig, ScanReading, Termination, TraversalConfig,  # noqa: E402
                      TraversalResult, naive_bounce, run_traversal)
from .ranging import (CameraModel, RangeModel, RotationReading, angle_from_step,  # noqa: E402
                      calibrate_unit, center_dot_search, distance_from_angle,
                      max_resolvable_distance, pixel_offset)
from .simworld import (CoverageReport, Rect, SceneParams, World, coverage, load_world,  # noqa: E402
                       raycast, render_frame, render_paths)
