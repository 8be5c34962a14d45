"""Six-direction furthest-first room traversal and the naive bounce baseline.

The planner only talks to two small interfaces: a range sensor
(``distance(pose, heading)``) and a motion base (``forward``, ``rotate``,
``pose``). :class:`roomscan.simworld.SimRobot` implements both.

Traversal loop:

1. scan six headings 60 degrees apart, relative to the current heading;
2. drive along the longest reading that clears the threshold, skipping
   exhausted headings and the way we came in;
3. stop when the next poll step would bring the forward reading under the
   threshold;
4. if nothing clears the threshold, lower it to the longest usable reading;
   if that is narrower than the robot, back out along the last segment;
5. if a move touches an earlier segment, head home along the traversal
   graph and finish.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import Trapped
from .geometry import EPS, Pose, angle_diff, contact_interval, normalize_angle, point_segment_distance

SIXTH = math.pi / 3
HALF_SECTOR = math.pi / 6
NODE_TOL = 1e-6


class RangeSensor(Protocol):
    def distance(self, pose: Pose, heading: float) -> float: ...


class Motion(Protocol):
    @property
    def pose(self) -> Pose: ...

    def forward(self, distance: float) -> Pose: ...

    def rotate(self, dheading: float) -> Pose: ...


class Termination(str, enum.Enum):
    RETURNED_TO_START = "ReturnedToStart"
    STEP_CAP_REACHED = "StepCapReached"
    TRAPPED = "Trapped"


@dataclass(frozen=True)
class ScanReading:
    direction_index: int
    heading: float
    distance: float


@dataclass(frozen=True)
class TraversalConfig:
    base_threshold: float = 20.0
    robot_width: float = 3.0
    poll_distance: float = 0.5
    step_cap: int = 50_000
    start_epsilon: float = 1.0

    def __post_init__(self):
        if self.robot_width <= 0 or self.poll_distance <= 0 or self.start_epsilon <= 0:
            raise ValueError("robot_width, poll_distance and start_epsilon must be positive")
        if self.base_threshold < self.robot_width:
            raise ValueError("base_threshold must be at least robot_width")
        if self.step_cap < 1:
            raise ValueError("step_cap must be positive")


@dataclass(frozen=True)
class BounceConfig:
    contact_distance: float = 2.0
    turn_angle: float = math.pi / 2  # positive turns left
    poll_distance: float = 0.5
    step_cap: int = 50_000
    start_epsilon: float = 1.0


@dataclass
class Node:
    x: float
    y: float
    exhausted: list[float] = field(default_factory=list)

    @property
    def xy(self):
        return self.x, self.y


@dataclass
class TraversalState:
    pose: Pose
    threshold: float
    base_threshold: float
    robot_width: float
    start: Pose
    nodes: list[Node] = field(default_factory=list)
    segments: list[tuple[int, int]] = field(default_factory=list)
    current: int = 0
    # segments on the way from start to the current node, for backtracking
    trail: list[int] = field(default_factory=list)
    arrival_heading: float | None = None
    path: list[Pose] = field(default_factory=list)
    scans: list[tuple[Pose, list[ScanReading]]] = field(default_factory=list)
    steps: int = 0
    distance_traveled: float = 0.0
    min_threshold: float = math.inf

    @classmethod
    def begin(cls, pose: Pose, cfg: TraversalConfig) -> "TraversalState":
        st = cls(pose=pose, threshold=cfg.base_threshold, base_threshold=cfg.base_threshold,
                 robot_width=cfg.robot_width, start=pose)
        st.nodes.append(Node(pose.x, pose.y))
        st.path.append(pose)
        st.min_threshold = cfg.base_threshold
        return st

    @property
    def lowered(self) -> bool:
        return self.threshold < self.base_threshold

    @property
    def stop_clearance(self) -> float:
        """Forward distance at which motion halts.

        Lowering the threshold to the longest reading would otherwise leave
        no room to move at all, so in lowered mode the robot may approach to
        its own width.
        """
        return self.robot_width if self.lowered else self.threshold

    def segment_points(self, k: int):
        i, j = self.segments[k]
        return self.nodes[i].xy, self.nodes[j].xy

    def node_at(self, x: float, y: float) -> int:
        for i, n in enumerate(self.nodes):
            if abs(n.x - x) <= NODE_TOL and abs(n.y - y) <= NODE_TOL:
                return i
        self.nodes.append(Node(x, y))
        return len(self.nodes) - 1


@dataclass
class TraversalResult:
    path: list[Pose]
    scans: list[tuple[Pose, list[ScanReading]]]
    termination: Termination
    steps_taken: int
    distance_traveled: float
    nodes: list[tuple[float, float]] = field(default_factory=list)
    segments: list[tuple[int, int]] = field(default_factory=list)
    min_threshold: float = math.inf
    algorithm: str = "traversal"

    @property
    def start(self) -> Pose:
        return self.path[0]


def scan_six(sensor: RangeSensor, pose: Pose) -> list[ScanReading]:
    """Six readings at ``pose.heading + k*60deg`` for k = 0..5."""
    out = []
    for k in range(6):
        h = normalize_angle(pose.heading + k * SIXTH)
        out.append(ScanReading(k, h, max(0.0, float(sensor.distance(pose, h)))))
    return out


def _is_exhausted(state: TraversalState, heading: float) -> bool:
    return any(angle_diff(heading, e) < HALF_SECTOR for e in state.nodes[state.current].exhausted)


def _is_reverse(state: TraversalState, heading: float) -> bool:
    if state.arrival_heading is None:
        return False
    return angle_diff(heading, state.arrival_heading + math.pi) < HALF_SECTOR + EPS


def _usable(readings, state):
    """Readings not exhausted at this node; the reverse heading only as a last resort."""
    fresh = [r for r in readings if not _is_exhausted(state, r.heading)]
    forward = [r for r in fresh if not _is_reverse(state, r.heading)]
    return forward, fresh


def choose_direction(readings: list[ScanReading], state: TraversalState,
                     allow_reverse: bool = True) -> ScanReading | None:
    """Longest reading at or above the threshold, or ``None`` when blocked.

    Ties go to the lowest direction index. The heading back the way we came
    is only offered when nothing else qualifies, and never when
    ``allow_reverse`` is false.
    """
    forward, fresh = _usable(readings, state)
    candidates = [r for r in forward if r.distance >= state.threshold]
    if not candidates and allow_reverse:
        candidates = [r for r in fresh if r.distance >= state.threshold]
    if not candidates:
        return None
    return max(candidates, key=lambda r: (r.distance, -r.direction_index))


def lower_threshold(state: TraversalState, readings: list[ScanReading],
                    allow_reverse: bool = True) -> bool:
    """Drop the threshold to the longest usable reading.

    Returns ``False`` (cannot lower) when even that is narrower than the robot;
    the threshold is left unchanged in that case.
    """
    forward, fresh = _usable(readings, state)
    pool = forward or (fresh if allow_reverse else [])
    if not pool:
        return False
    longest = max(r.distance for r in pool)
    if longest < state.robot_width:
        return False
    state.threshold = min(longest, state.base_threshold)
    state.min_threshold = min(state.min_threshold, state.threshold)
    return True


def restore_threshold(state: TraversalState, readings: list[ScanReading]) -> None:
    if state.lowered and any(r.distance >= state.base_threshold for r in readings):
        state.threshold = state.base_threshold


def first_contact(p, q, state: TraversalState, exclude_origin: bool = True) -> float | None:
    """Smallest parameter along ``p -> q`` touching an earlier segment.

    Contact confined to ``p`` itself (the node we are leaving) is ignored.
    """
    length = math.hypot(q[0] - p[0], q[1] - p[1])
    if length == 0:
        return None
    t_origin = EPS / length
    best = None
    for k in range(len(state.segments)):
        a, b = state.segment_points(k)
        if a == b:
            continue
        iv = contact_interval(p, q, a, b)
        if iv is None:
            continue
        t0, t1 = iv
        if exclude_origin and t1 <= t_origin:
            continue
        # an overlap that starts at the origin counts from t0 ~ 0
        best = t0 if best is None else min(best, t0)
    return best


def detect_cycle(new_segment, state: TraversalState) -> bool:
    """True when ``new_segment`` touches any earlier segment away from its own origin."""
    p, q = new_segment
    return first_contact(p, q, state) is not None


def _record_pose(state: TraversalState, motion: Motion):
    state.pose = motion.pose
    state.path.append(state.pose)


def traversal_step(state: TraversalState, heading: float, sensor: RangeSensor, motion: Motion,
                   poll_distance: float) -> tuple[float, bool]:
    """Drive along ``heading`` in poll-sized steps until the threshold stops us.

    Returns ``(distance moved, crossed)``. ``crossed`` means the move touched
    an earlier segment; the robot is stopped at the contact point. A move of
    any length ends at a node joined to the origin by a new segment.
    """
    motion.rotate(heading - motion.pose.heading)
    state.pose = motion.pose
    origin = state.nodes[state.current].xy
    clearance = state.stop_clearance
    crossed = False
    while True:
        fwd = sensor.distance(motion.pose, heading)
        if fwd - poll_distance < clearance - EPS:
            break
        here = motion.pose.xy
        ahead = motion.pose.advanced(poll_distance).xy
        t = first_contact(origin, ahead, state)
        if t is not None:
            # stop on the earlier line (distance from origin to contact point)
            reach = t * math.hypot(ahead[0] - origin[0], ahead[1] - origin[1])
            step = max(0.0, reach - math.hypot(here[0] - origin[0], here[1] - origin[1]))
            crossed = True
        else:
            step = poll_distance
        before = motion.pose
        after = motion.forward(step)
        moved = before.distance_to(after)
        state.steps += 1
        state.distance_traveled += moved
        if moved > 0:
            _record_pose(state, motion)
        if crossed or moved < step - 1e-9:
            break
    end = motion.pose
    state.pose = end
    moved_total = math.hypot(end.x - origin[0], end.y - origin[1])
    if moved_total <= NODE_TOL:
        return 0.0, crossed
    prev = state.current
    state.current = state.node_at(end.x, end.y)
    state.segments.append((prev, state.current))
    state.trail.append(len(state.segments) - 1)
    state.arrival_heading = heading
    return moved_total, crossed


def backtrack(state: TraversalState, motion: Motion) -> None:
    """Retrace the most recent segment back to its start node.

    The heading that led into the dead end is marked exhausted there.
    Raises :class:`Trapped` when there is nothing left to retrace.
    """
    if not state.trail:
        raise Trapped("no traversed segment to back out along")
    k = state.trail.pop()
    i, j = state.segments[k]
    a, b = state.nodes[i], state.nodes[j]
    out_heading = math.atan2(b.y - a.y, b.x - a.x)
    _drive_to(state, motion, a.xy)
    a.exhausted.append(normalize_angle(out_heading))
    state.current = i
    if state.trail:
        pi, pj = state.segments[state.trail[-1]]
        p, q = state.nodes[pi], state.nodes[pj]
        state.arrival_heading = normalize_angle(math.atan2(q.y - p.y, q.x - p.x))
    else:
        state.arrival_heading = None


def _drive_to(state: TraversalState, motion: Motion, target) -> None:
    here = motion.pose
    dist = math.hypot(target[0] - here.x, target[1] - here.y)
    if dist <= NODE_TOL:
        return
    heading = math.atan2(target[1] - here.y, target[0] - here.x)
    motion.rotate(heading - here.heading)
    after = motion.forward(dist)
    state.steps += 1
    state.distance_traveled += here.distance_to(after)
    _record_pose(state, motion)


def _graph_edges(state: TraversalState):
    """Undirected edges, with segments split wherever another node lies on them."""
    pts = [n.xy for n in state.nodes]
    edges = {}
    for i, j in state.segments:
        a, b = pts[i], pts[j]
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        if length == 0:
            continue
        on = []
        for k, p in enumerate(pts):
            if point_segment_distance(p, a, b) <= NODE_TOL:
                t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (length * length)
                on.append((t, k))
        on.sort()
        for (_, u), (_, v) in zip(on, on[1:]):
            if u != v:
                w = math.hypot(pts[u][0] - pts[v][0], pts[u][1] - pts[v][1])
                key = (min(u, v), max(u, v))
                edges[key] = min(w, edges.get(key, math.inf))
    return edges


def path_to_start(state: TraversalState) -> list[Pose]:
    """Shortest route from the current node to the start over traversed segments."""
    n = len(state.nodes)
    if state.current == 0:
        return [state.pose]
    edges = _graph_edges(state)
    rows, cols, weights = [], [], []
    for (u, v), w in edges.items():
        # csgraph treats explicit zeros as missing edges
        w = max(w, 1e-12)
        rows += [u, v]
        cols += [v, u]
        weights += [w, w]
    graph = csr_matrix((weights, (rows, cols)), shape=(n, n))
    dist, pred = dijkstra(graph, directed=False, indices=state.current, return_predecessors=True)
    assert np.isfinite(dist[0]), "traversal graph must connect back to the start"
    order = [0]
    while order[-1] != state.current:
        order.append(int(pred[order[-1]]))
    order.reverse()
    out = []
    for u, v in zip(order, order[1:]):
        h = math.atan2(state.nodes[v].y - state.nodes[u].y, state.nodes[v].x - state.nodes[u].x)
        out.append(Pose(state.nodes[u].x, state.nodes[u].y, h))
    last = state.nodes[0]
    out.append(Pose(last.x, last.y, out[-1].heading))
    return out


def _go_home(state: TraversalState, motion: Motion) -> None:
    for pose in path_to_start(state)[1:]:
        _drive_to(state, motion, pose.xy)
    state.current = 0


def _result(state: TraversalState, termination: Termination) -> TraversalResult:
    return TraversalResult(
        path=list(state.path), scans=list(state.scans), termination=termination,
        steps_taken=state.steps, distance_traveled=state.distance_traveled,
        nodes=[n.xy for n in state.nodes], segments=list(state.segments),
        min_threshold=state.min_threshold, algorithm="traversal")


def _scan(state: TraversalState, sensor: RangeSensor, motion: Motion) -> list[ScanReading]:
    readings = scan_six(sensor, motion.pose)
    state.scans.append((motion.pose, readings))
    state.steps += 1
    return readings


def run_traversal(sensor: RangeSensor, motion: Motion, config: TraversalConfig | None = None) -> TraversalResult:
    """Explore from the current pose until a cycle sends the robot home.

    Never raises for planning outcomes; the reason for stopping is recorded
    in ``TraversalResult.termination``.
    """
    cfg = config or TraversalConfig()
    state = TraversalState.begin(motion.pose, cfg)
    readings = _scan(state, sensor, motion)
    while state.steps < cfg.step_cap:
        restore_threshold(state, readings)
        # retreat goes through backtrack, never through a reverse move
        choice = choose_direction(readings, state, allow_reverse=False)
        if choice is None:
            if not lower_threshold(state, readings, allow_reverse=False):
                try:
                    backtrack(state, motion)
                except Trapped:
                    # everything reachable from the start is exhausted
                    done = state.distance_traveled > 0 and state.current == 0
                    return _result(state, Termination.RETURNED_TO_START if done else Termination.TRAPPED)
                readings = _scan(state, sensor, motion)
                continue
            choice = choose_direction(readings, state, allow_reverse=False)
            assert choice is not None
        moved, crossed = traversal_step(state, choice.heading, sensor, motion, cfg.poll_distance)
        if crossed:
            _go_home(state, motion)
            return _result(state, Termination.RETURNED_TO_START)
        if moved == 0.0:
            state.nodes[state.current].exhausted.append(choice.heading)
            continue
        readings = _scan(state, sensor, motion)
    return _result(state, Termination.STEP_CAP_REACHED)


def naive_bounce(sensor: RangeSensor, motion: Motion, config: BounceConfig | None = None) -> TraversalResult:
    """Drive straight, turn 90 degrees at every obstacle, stop back at the start."""
    cfg = config or BounceConfig()
    start = motion.pose
    path = [start]
    steps = 0
    traveled = 0.0
    turns = 0
    while steps < cfg.step_cap:
        pose = motion.pose
        fwd = sensor.distance(pose, pose.heading)
        if fwd - cfg.poll_distance < cfg.contact_distance - EPS:
            motion.rotate(cfg.turn_angle)
            turns += 1
            steps += 1
            continue
        after = motion.forward(cfg.poll_distance)
        steps += 1
        moved = pose.distance_to(after)
        if moved <= 0:
            motion.rotate(cfg.turn_angle)
            turns += 1
            continue
        traveled += moved
        path.append(after)
        if turns >= 1 and point_segment_distance(start.xy, pose.xy, after.xy) <= cfg.start_epsilon:
            return TraversalResult(path, [], Termination.RETURNED_TO_START, steps, traveled, algorithm="bounce")
    return TraversalResult(path, [], Termination.STEP_CAP_REACHED, steps, traveled, algorithm="bounce")
