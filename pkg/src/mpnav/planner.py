"""A* search over the space spanned by motion primitives.

States are continuous poses; duplicate detection closes a discretised cell of
(x, y, heading). A per-cell failure penalty can be added to the heuristic to
steer the search away from places where motions failed before.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Pose2D, compose_many
from .primitives import MotionPrimitive
from .sim import OccupancyGrid


class PlanningError(Exception):
    pass


class NoPath(PlanningError):
    """The open list emptied without reaching the goal."""


class BudgetExhausted(PlanningError):
    """The expansion budget ran out before the goal was reached."""


@dataclass(frozen=True)
class PlannerConfig:
    cell_size: float = 0.25
    heading_bins: int = 16
    goal_tolerance: float = 0.5
    budget: int = 50_000
    footprint: float = 0.25


@dataclass
class PenaltyGrid:
    resolution: float = 0.25
    beta: float = 1.0
    decay: float = 0.5
    cells: dict[tuple[int, int], float] = field(default_factory=dict)

    def cell(self, x: float, y: float) -> tuple[int, int]:
        return math.floor(x / self.resolution), math.floor(y / self.resolution)

    def at(self, x: float, y: float) -> float:
        return self.cells.get(self.cell(x, y), 0.0)

    def copy(self) -> "PenaltyGrid":
        return PenaltyGrid(self.resolution, self.beta, self.decay, dict(self.cells))


@dataclass
class SearchState:
    pose: Pose2D
    g: float = 0.0
    parent: "SearchState | None" = None
    via_mp: int | None = None


@dataclass(frozen=True)
class Rejection:
    """A successor discarded because its swept trace hit an obstacle."""

    parent: Pose2D
    mp_id: int
    trace: np.ndarray  # world poses up to and including the first colliding sample


@dataclass
class Plan:
    states: list[Pose2D]
    actions: list[int]
    length: float
    expansions: int = 0
    rejections: list[Rejection] = field(default_factory=list)

    def __post_init__(self):
        if len(self.actions) != len(self.states) - 1:
            raise ValueError("a plan needs exactly one action between consecutive states")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "x", "y", "theta", "mp_id"])
            for i, s in enumerate(self.states):
                mp = self.actions[i] if i < len(self.actions) else ""
                w.writerow([i, f"{s.x:.6f}", f"{s.y:.6f}", f"{s.theta:.6f}", mp])


def heuristic(pose: Pose2D, goal: tuple[float, float], penalty: PenaltyGrid | None = None,
              goal_tolerance: float = 0.0) -> float:
    """Euclidean distance to the goal ball plus the penalty of the pose's cell.

    With ``goal_tolerance`` > 0 the distance is measured to the tolerance
    ball, which keeps the estimate consistent for a ball-shaped goal test.
    """
    d = max(0.0, math.hypot(goal[0] - pose.x, goal[1] - pose.y) - goal_tolerance)
    if penalty is not None:
        d += penalty.at(pose.x, pose.y)
    return d


def state_key(x: float, y: float, theta: float, cfg: PlannerConfig, in_goal: bool) -> tuple:
    # cells are centred on multiples of cell_size so lattice-aligned poses key stably
    b = round(theta / (2.0 * math.pi / cfg.heading_bins)) % cfg.heading_bins
    return round(x / cfg.cell_size), round(y / cfg.cell_size), b, in_goal


@dataclass
class Successors:
    poses: list[Pose2D]
    costs: list[float]
    mp_ids: list[int]
    rejections: list[Rejection]


class MPLibrary:
    """Pre-stacked pose traces of the primitives used for expansion."""

    def __init__(self, mps: Sequence[MotionPrimitive]):
        self.mps = list(mps)
        self.ids = [m.id for m in self.mps]
        n = max((len(m.poses) for m in self.mps), default=0)
        # pad shorter traces by repeating their last pose
        self.traces = np.zeros((len(self.mps), n, 3))
        for k, m in enumerate(self.mps):
            tr = m.trace_array()
            self.traces[k, :len(tr)] = tr
            self.traces[k, len(tr):] = tr[-1]
        self.costs = np.array([m.arc_length() for m in self.mps])

    def __len__(self):
        return len(self.mps)


def expand(state: SearchState, library: MPLibrary | Sequence[MotionPrimitive],
           grid: OccupancyGrid | None, footprint: float = 0.25) -> Successors:
    """Compose every primitive onto ``state.pose`` and drop the ones that collide."""
    if not isinstance(library, MPLibrary):
        library = MPLibrary(library)
    out = Successors([], [], [], [])
    if len(library) == 0:
        return out
    world = compose_many(state.pose, library.traces)
    if grid is not None:
        blocked = grid.blocked_points(world[..., :2], footprint)
        hit = blocked.any(axis=1)
    else:
        hit = np.zeros(len(library), dtype=bool)
    for k in range(len(library)):
        if hit[k]:
            first = int(np.argmax(blocked[k]))
            out.rejections.append(Rejection(state.pose, library.ids[k], world[k, :first + 1].copy()))
            continue
        end = world[k, -1]
        out.poses.append(Pose2D(end[0], end[1], end[2]))
        out.costs.append(state.g + float(library.costs[k]))
        out.mp_ids.append(library.ids[k])
    return out


def extract_path(state: SearchState) -> tuple[list[Pose2D], list[int]]:
    poses, actions = [], []
    while state is not None:
        poses.append(state.pose)
        if state.via_mp is not None:
            actions.append(state.via_mp)
        state = state.parent
    return poses[::-1], actions[::-1]


def plan_astar(mps: Sequence[MotionPrimitive] | MPLibrary, start: Pose2D, goal: tuple[float, float],
               grid: OccupancyGrid | None = None, penalty: PenaltyGrid | None = None,
               config: PlannerConfig = PlannerConfig()) -> Plan:
    """A* from ``start`` until a state within ``goal_tolerance`` of ``goal`` is expanded."""
    library = mps if isinstance(mps, MPLibrary) else MPLibrary(mps)
    tol = config.goal_tolerance

    def in_goal(p: Pose2D) -> bool:
        return math.hypot(goal[0] - p.x, goal[1] - p.y) <= tol

    root = SearchState(start)
    tie = itertools.count()
    # open entries: (f, -g, seq, state); larger g first on equal f
    open_list = [(heuristic(start, goal, penalty, tol), -0.0, next(tie), root)]
    best_g = {state_key(start.x, start.y, start.theta, config, in_goal(start)): 0.0}
    closed: set[tuple] = set()
    rejections: list[Rejection] = []
    expansions = 0
    while open_list:
        _, _, _, s = heapq.heappop(open_list)
        key = state_key(s.pose.x, s.pose.y, s.pose.theta, config, in_goal(s.pose))
        if key in closed:
            continue
        if in_goal(s.pose):
            poses, actions = extract_path(s)
            return Plan(poses, actions, s.g, expansions, rejections)
        if expansions >= config.budget:
            raise BudgetExhausted(f"no plan within {config.budget} expansions")
        closed.add(key)
        expansions += 1
        succ = expand(s, library, grid, config.footprint)
        rejections.extend(succ.rejections)
        for pose, g, mp_id in zip(succ.poses, succ.costs, succ.mp_ids):
            k = state_key(pose.x, pose.y, pose.theta, config, in_goal(pose))
            if k in closed or g >= best_g.get(k, math.inf):
                continue
            best_g[k] = g
            child = SearchState(pose, g, s, mp_id)
            heapq.heappush(open_list, (g + heuristic(pose, goal, penalty, tol), -g, next(tie), child))
    raise NoPath(f"open list exhausted after {expansions} expansions")


def update_penalty(penalty: PenaltyGrid, failed_trace: Sequence[Pose2D] | np.ndarray,
                   beta: float | None = None, decay: float | None = None) -> PenaltyGrid:
    """Raise the penalty of every cell the failed trace covers.

    The last pose of the trace is the failure point. A cell receives
    ``beta * exp(-d / decay)`` once, with ``d`` the smallest along-path
    distance from the failure point of any trace sample inside it.
    """
    beta = penalty.beta if beta is None else beta
    decay = penalty.decay if decay is None else decay
    pts = np.array([[p.x, p.y] for p in failed_trace]) if not isinstance(failed_trace, np.ndarray) \
        else np.asarray(failed_trace)[:, :2]
    out = penalty.copy()
    if len(pts) == 0:
        return out
    seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
    to_end = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    nearest: dict[tuple[int, int], float] = {}
    for (x, y), d in zip(pts, to_end):
        c = out.cell(x, y)
        if d < nearest.get(c, math.inf):
            nearest[c] = d
    for c, d in nearest.items():
        out.cells[c] = out.cells.get(c, 0.0) + beta * math.exp(-d / decay)
    return out
