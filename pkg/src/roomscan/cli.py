"""``roomscan`` command line: detect, calibrate, range, simulate, compare.

Exit codes::

    0   success
    1   no laser dot detected, unreadable or malformed image
    2   dot lost during a centring search (includes HTTP failures)
    3   centring search did not converge
    4   world file could not be parsed or validated
    64  bad command-line usage

Settings come from built-in defaults, then an optional JSON ``--config``
file (snake_case keys), then command-line flags.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from . import __version__
from .detection import (DetectionConfig, circle_ratio, detect_laser_dot, detection_mask)
from .errors import (DotLost, MalformedInput, NetworkError, NoConvergence, NotFound,
                     OutOfRange, ParseError, ValidationError)
from .imaging import RgbImage, decode_png, encode_png, rgb_to_hsv
from .planner import BounceConfig, TraversalConfig, TraversalResult, naive_bounce, run_traversal
from .ranging import (CameraModel, RangeModel, calibrate_unit, center_dot_search, distance_error_bound,
                      distance_from_angle, pixel_offset)
from .simworld import (SceneParams, SimRobot, SimulatedRig, World, coverage, find_start, load_world,
                       render_paths, target_world)

EXIT_OK = 0
EXIT_NOT_FOUND = 1
EXIT_DOT_LOST = 2
EXIT_NO_CONVERGENCE = 3
EXIT_WORLD = 4
EXIT_USAGE = 64

FORMAT_VERSION = 1


@dataclass
class RunConfig:
    # detection
    value_threshold: float = 0.8
    hue_target: float = 1.0 / 3.0
    hue_threshold: float = 0.08
    saturation_min: float = 0.3
    min_blob_size: int = 4
    min_circle_ratio: float = 0.75
    # camera and rig
    fov: float = 60.0  # degrees
    width: int = 640
    height: int = 480
    steps_per_revolution: int = 1600
    baseline: float = 0.1
    max_lost_frames: int = 3
    # planner
    base_threshold: float = 20.0
    robot_width: float = 3.0
    poll_distance: float = 0.5
    step_cap: int = 50_000
    start_epsilon: float = 1.0
    contact_distance: float = 2.0
    sensor_max: float = 100.0
    cell_size: float = 1.0
    # io
    world: str | None = None
    out_dir: str = "."
    seed: int = 0
    noise_fraction: float = 0.0
    timeout: float = 5.0

    def detection(self) -> DetectionConfig:
        return DetectionConfig(self.value_threshold, self.hue_target, self.hue_threshold,
                               self.saturation_min, self.min_blob_size, self.min_circle_ratio)

    def camera(self) -> CameraModel:
        return CameraModel(self.width, self.height, math.radians(self.fov), self.steps_per_revolution)

    def scene(self) -> SceneParams:
        return SceneParams(camera=self.camera(), baseline=self.baseline,
                           noise_seed=self.seed, noise_fraction=self.noise_fraction)

    def traversal(self) -> TraversalConfig:
        return TraversalConfig(self.base_threshold, self.robot_width, self.poll_distance,
                               self.step_cap, self.start_epsilon)

    def bounce(self) -> BounceConfig:
        return BounceConfig(contact_distance=self.contact_distance, poll_distance=self.poll_distance,
                            step_cap=self.step_cap, start_epsilon=self.start_epsilon)


_HELP = {
    "value_threshold": "minimum HSV value kept by the luminosity filter",
    "hue_target": "laser hue in [0,1] (1/3 is green)",
    "hue_threshold": "maximum circular hue distance from the target",
    "saturation_min": "minimum saturation kept by the hue filter",
    "min_blob_size": "blobs smaller than this many pixels are dropped",
    "min_circle_ratio": "blobs with a flatter bounding box are rejected as reflections",
    "fov": "horizontal field of view in degrees",
    "width": "image width in pixels",
    "height": "image height in pixels",
    "steps_per_revolution": "stepper motor resolution",
    "baseline": "camera-laser separation in world units (simulated rig)",
    "max_lost_frames": "consecutive dot-less frames before giving up",
    "base_threshold": "initial obstacle threshold in world units",
    "robot_width": "robot diameter in world units",
    "poll_distance": "forward distance between range polls",
    "step_cap": "planner step budget",
    "start_epsilon": "how close counts as back at the start",
    "contact_distance": "naive bounce turns when this close to an obstacle",
    "sensor_max": "range sensor cap in world units",
    "cell_size": "coverage raster cell size",
    "world": "world JSON file or bundled fixture name (figure6, trap, empty)",
    "out_dir": "directory for output files",
    "seed": "seed for simulated frame noise",
    "noise_fraction": "fraction of simulated pixels replaced by dark noise",
    "timeout": "HTTP timeout in seconds",
}

_GROUPS = {
    "detect": ["value_threshold", "hue_target", "hue_threshold", "saturation_min", "min_blob_size",
               "min_circle_ratio"],
    "camera": ["fov", "width", "height", "steps_per_revolution", "baseline", "max_lost_frames",
               "seed", "noise_fraction", "timeout"],
    "planner": ["base_threshold", "robot_width", "poll_distance", "step_cap", "start_epsilon",
                "contact_distance", "sensor_max", "cell_size", "world", "out_dir"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser, names):
    defaults = RunConfig()
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    seen = set()
    for name in names:
        if name in seen:
            continue
        seen.add(name)
        kind = {"int": int, "float": float}.get(str(types[name]), str)
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None,
                       help=f"{_HELP[name]} (default: {getattr(defaults, name)})")
    p.add_argument("--config", help="JSON file with RunConfig values (default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roomscan", description="Laser-dot range finding and room traversal.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="find the laser dot in a PNG frame")
    p.add_argument("image", help="PNG file")
    p.add_argument("--dump-mask", help="write the combined filter mask as a PNG (default: none)")
    _add_config_flags(p, _GROUPS["detect"])

    for name, helptext in (("calibrate", "centre the dot at one unit and save a range model"),
                           ("range", "measure one distance with a saved range model")):
        p = sub.add_parser(name, help=helptext)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--url", help="HTTP endpoint returning PNG frames (default: simulated rig)")
        src.add_argument("--sim-distance", type=float, default=None,
                         help="target distance for the simulated rig (default: 1.0)")
        if name == "calibrate":
            p.add_argument("--model-out", default="model.json", help="output path (default: model.json)")
        else:
            p.add_argument("--model", required=True, help="range model written by calibrate")
        _add_config_flags(p, _GROUPS["detect"] + _GROUPS["camera"])

    p = sub.add_parser("simulate", help="run one planner on a world")
    p.add_argument("--algorithm", choices=("traversal", "bounce"), default="traversal",
                   help="planner to run (default: traversal)")
    _add_config_flags(p, _GROUPS["planner"])

    p = sub.add_parser("compare", help="run both planners on a world")
    _add_config_flags(p, _GROUPS["planner"])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in dataclasses.fields(RunConfig)}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        unknown = set(doc) - names
        if unknown:
            raise ParseError(f"unknown config keys: {sorted(unknown)}", field=sorted(unknown)[0])
        cfg = dataclasses.replace(cfg, **doc)
    flags = {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}
    return dataclasses.replace(cfg, **flags)


# -- frame sources -----------------------------------------------------------

class HttpFrameSource:
    """Fetch one PNG frame per request from a camera HTTP endpoint.

    Transient failures are retried with exponential backoff; after the last
    attempt a :class:`NetworkError` is raised.
    """

    def __init__(self, url: str, timeout: float = 5.0, attempts: int = 3, backoff: float = 0.1):
        self.url = url
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff

    def fetch(self) -> bytes:
        last = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with urllib.request.urlopen(self.url, timeout=self.timeout) as resp:
                    return resp.read()
            except (urllib.error.URLError, OSError) as exc:
                last = exc
        raise NetworkError(f"GET {self.url} failed after {self.attempts} attempts: {last}")

    def next_frame(self) -> RgbImage:
        return decode_png(self.fetch())


def http_frame_source(url: str, timeout: float = 5.0) -> HttpFrameSource:
    return HttpFrameSource(url, timeout)


class LoggingActuator:
    """Stand-in for the stepper driver: tracks the index and logs each step."""

    def __init__(self, stream=None):
        self._position = 0
        self.stream = stream if stream is not None else sys.stderr

    @property
    def position(self) -> int:
        return self._position

    def step(self, direction: int) -> None:
        self._position += direction
        print(f"step {direction:+d} -> {self._position}", file=self.stream)


def _rig(args, cfg: RunConfig):
    if args.url:
        return http_frame_source(args.url, cfg.timeout), LoggingActuator()
    d = 1.0 if args.sim_distance is None else args.sim_distance
    world, pose = target_world(d)
    rig = SimulatedRig(world, pose, cfg.scene())
    return rig, rig


# -- persisted documents -----------------------------------------------------

def model_to_json(model: RangeModel, cam: CameraModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "baseline": model.baseline,
        "calibration_angle": model.calibration_angle,
        "camera": {
            "image_width": cam.image_width,
            "image_height": cam.image_height,
            "horizontal_fov": cam.horizontal_fov,
            "steps_per_revolution": cam.steps_per_revolution,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def model_from_json(text: str) -> tuple[RangeModel, CameraModel]:
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported model format_version {doc.get('format_version')!r}",
                         field="format_version")
    return (RangeModel(doc["baseline"], doc["calibration_angle"]), CameraModel(**doc["camera"]))


def path_log(result: TraversalResult, report, cfg: RunConfig) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "algorithm": result.algorithm,
        "termination": result.termination.value,
        "steps_taken": result.steps_taken,
        "distance_traveled": result.distance_traveled,
        "coverage": dataclasses.asdict(report),
        # out_dir is excluded so identical runs log identical bytes wherever they land
        "config": {k: v for k, v in dataclasses.asdict(cfg).items() if k != "out_dir"},
        "path": [[p.x, p.y, p.heading] for p in result.path],
        "nodes": [list(n) for n in result.nodes],
        "segments": [list(s) for s in result.segments],
    }
    return json.dumps(doc, indent=1) + "\n"


def load_world_arg(name: str | None) -> World:
    from .simworld import load_fixture

    if name is None:
        raise ParseError("no world given (use --world)", field="world")
    if not os.path.exists(name) and name in ("figure6", "trap", "empty"):
        return load_fixture(name)
    try:
        with open(name) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read world file: {exc}", field="world") from exc
    return load_world(text)


# -- commands ------------------------------------------------------------------

def cmd_detect(args, cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        with open(args.image, "rb") as fh:
            img = decode_png(fh.read())
    except OSError as exc:
        print(f"error: cannot read {args.image}: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    hsv = rgb_to_hsv(img)
    det = cfg.detection()
    if args.dump_mask:
        with open(args.dump_mask, "wb") as fh:
            fh.write(encode_png(detection_mask(hsv, det)))
    try:
        dot = detect_laser_dot(hsv, det)
    except NotFound:
        print("no laser dot detected", file=sys.stderr)
        return EXIT_NOT_FOUND
    print(f"centroid_x: {dot.centroid[0]:.3f}", file=out)
    print(f"centroid_y: {dot.centroid[1]:.3f}", file=out)
    print(f"blob_size: {dot.blob.size}", file=out)
    print(f"circle_ratio: {circle_ratio(dot.blob):.4f}", file=out)
    print(f"pixel_offset: {pixel_offset(dot):.3f}", file=out)
    return EXIT_OK


def _search(args, cfg: RunConfig):
    frames, actuator = _rig(args, cfg)
    return center_dot_search(frames, actuator, cfg.camera(), cfg.detection(), cfg.max_lost_frames)


def cmd_calibrate(args, cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    reading = _search(args, cfg)
    model = calibrate_unit(reading.angle)
    with open(args.model_out, "w") as fh:
        fh.write(model_to_json(model, cfg.camera()))
    print(f"calibration_step: {reading.step_index}", file=out)
    print(f"calibration_angle: {reading.angle:.9f}", file=out)
    print(f"baseline: {model.baseline:.9f}", file=out)
    return EXIT_OK


def cmd_range(args, cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    with open(args.model) as fh:
        model, cam = model_from_json(fh.read())
    cfg = dataclasses.replace(cfg, width=cam.image_width, height=cam.image_height,
                              fov=math.degrees(cam.horizontal_fov),
                              steps_per_revolution=cam.steps_per_revolution)
    reading = _search(args, cfg)
    d = distance_from_angle(model, reading.angle)
    print(f"distance: {d:.6f}", file=out)
    print(f"error_bound: {distance_error_bound(model, cam, d):.6f}", file=out)
    return EXIT_OK


def _run(world: World, algorithm: str, cfg: RunConfig) -> TraversalResult:
    radius = cfg.robot_width / 2
    start = world.start if world.start is not None else find_start(world, radius)
    bot = SimRobot(world, start, radius, cfg.sensor_max)
    if algorithm == "traversal":
        return run_traversal(bot, bot, cfg.traversal())
    return naive_bounce(bot, bot, cfg.bounce())


def _simulate_one(world, algorithm, cfg):
    result = _run(world, algorithm, cfg)
    report = coverage(world, result.path, cfg.robot_width / 2, cfg.cell_size)
    os.makedirs(cfg.out_dir, exist_ok=True)
    base = os.path.join(cfg.out_dir, algorithm)
    with open(base + "_path.json", "w") as fh:
        fh.write(path_log(result, report, cfg))
    with open(base + ".svg", "wb") as fh:
        fh.write(render_paths(world, [result], "svg"))
    return result, report


def _row(result, report):
    return (result.algorithm, f"{report.fraction:.4f}", str(result.steps_taken),
            f"{result.distance_traveled:.2f}", result.termination.value)


def cmd_simulate(args, cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    world = load_world_arg(cfg.world)
    result, report = _simulate_one(world, args.algorithm, cfg)
    print(" ".join(_row(result, report)), file=out)
    return EXIT_OK


def cmd_compare(args, cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    world = load_world_arg(cfg.world)
    rows = [("algorithm", "coverage", "steps", "distance", "termination")]
    for algorithm in ("traversal", "bounce"):
        rows.append(_row(*_simulate_one(world, algorithm, cfg)))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)
    return EXIT_OK


_COMMANDS = {"detect": cmd_detect, "calibrate": cmd_calibrate, "range": cmd_range,
             "simulate": cmd_simulate, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](args, cfg)
    except DotLost as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOT_LOST
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WORLD
    except (OutOfRange, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
