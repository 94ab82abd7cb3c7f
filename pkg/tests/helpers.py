"""Small builders and independent oracles shared by the test modules."""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

from mpnav.geometry import Pose2D, RobotModel, WheelCommand
from mpnav.primitives import LogRow, MotionPrimitive
from mpnav.sim import Simulator

SMALL = RobotModel(wheel_radius=0.1, track_width=0.4, max_wheel_speed=16.0)


def euler_oracle(v: float, w: float, T: float, h: float = 1e-5, start=(0.0, 0.0, 0.0)):
    """Fine explicit Euler in closed vectorised form (heading is linear in time)."""
    n = int(round(T / h))
    th = start[2] + w * h * np.arange(n)
    x = start[0] + v * h * np.cos(th).sum()
    y = start[1] + v * h * np.sin(th).sum()
    return x, y, start[2] + w * T


def drive_log(commands, dt: float = 0.05, model: RobotModel | None = None, profile="normal") -> list[LogRow]:
    """Run (cmd, n_steps) pairs through a noiseless simulator and log every step."""
    sim = Simulator(model or RobotModel(), profile, dt=dt)
    rows = []
    for cmd, n in commands:
        for _ in range(n):
            rows.append(LogRow(sim.clock, cmd, sim.localize()))
            sim.step(cmd)
    rows.append(LogRow(sim.clock, WheelCommand(0.0, 0.0), sim.localize()))
    return rows


def constant_mp(cmd: WheelCommand, duration: float = 1.0, dt: float = 0.05, model: RobotModel | None = None,
                mp_id: int = 0, profile="normal") -> MotionPrimitive:
    """Primitive recorded by driving ``cmd`` for ``duration`` seconds."""
    sim = Simulator(model or RobotModel(), profile, dt=dt)
    n = int(round(duration / dt))
    controls, poses = [], [(0.0, Pose2D())]
    for _ in range(n):
        controls.append((sim.clock, cmd))
        sim.step(cmd)
        poses.append((sim.clock, sim.pose))
    return MotionPrimitive(controls, poses, mp_id)


def line_mp(length: float, mp_id: int = 0, samples: int = 20) -> MotionPrimitive:
    """Synthetic straight primitive of exact ``length`` metres taking one second."""
    ts = np.linspace(0.0, 1.0, samples + 1)
    cmd = WheelCommand(length / 0.098, length / 0.098)
    return MotionPrimitive([(0.0, cmd)], [(float(t), Pose2D(length * t, 0.0, 0.0)) for t in ts], mp_id)


def arc_mp(radius: float, angle: float, mp_id: int = 0, samples: int = 20) -> MotionPrimitive:
    """Synthetic arc of signed ``angle`` on a circle of ``radius`` (left turn if angle > 0)."""
    ts = np.linspace(0.0, 1.0, samples + 1)
    poses = []
    for t in ts:
        a = angle * t
        poses.append((float(t), Pose2D(radius * math.sin(abs(a)), math.copysign(radius * (1 - math.cos(a)), angle), a)))
    return MotionPrimitive([(0.0, WheelCommand(1.0, 1.0))], poses, mp_id)


def dijkstra_oracle(mps, start: Pose2D, goal, grid, cfg):
    """Uniform-cost search over the same implicit graph the planner walks.

    Independent of the planner's code path: composes traces with plain trig,
    keys states exactly as documented (0.25 m cells, 16 heading bins, in-goal
    flag) and uses the grid's conservative lookup for swept samples.
    """
    def in_goal(x, y):
        return math.hypot(goal[0] - x, goal[1] - y) <= cfg.goal_tolerance

    def key(x, y, th):
        b = round(th * cfg.heading_bins / (2 * math.pi)) % cfg.heading_bins
        return (round(x / cfg.cell_size), round(y / cfg.cell_size), b, in_goal(x, y))

    n = max(len(m.poses) for m in mps)
    tx = np.array([np.pad(m.trace_array()[:, 0], (0, n - len(m.poses)), mode="edge") for m in mps])
    ty = np.array([np.pad(m.trace_array()[:, 1], (0, n - len(m.poses)), mode="edge") for m in mps])
    dth = [m.end_pose.theta for m in mps]
    costs = [m.arc_length() for m in mps]
    tie = itertools.count()
    open_ = [(0.0, next(tie), start.x, start.y, start.theta)]
    best = {key(start.x, start.y, start.theta): 0.0}
    closed = set()
    while open_:
        g, _, x, y, th = heapq.heappop(open_)
        k = key(x, y, th)
        if k in closed:
            continue
        if in_goal(x, y):
            return g
        closed.add(k)
        c, s = math.cos(th), math.sin(th)
        wx = x + c * tx - s * ty
        wy = y + s * tx + c * ty
        if grid is not None:
            hit = grid.blocked_points(np.stack([wx, wy], axis=-1), cfg.footprint).any(axis=1)
        else:
            hit = np.zeros(len(mps), dtype=bool)
        for j in range(len(mps)):
            if hit[j]:
                continue
            nth = math.remainder(th + dth[j], 2 * math.pi)
            if nth == -math.pi:
                nth = math.pi
            ex, ey = float(wx[j, -1]), float(wy[j, -1])
            nk = key(ex, ey, nth)
            ng = g + costs[j]
            if nk in closed or ng >= best.get(nk, math.inf):
                continue
            best[nk] = ng
            heapq.heappush(open_, (ng, next(tie), ex, ey, nth))
    return None


def brute_force_exemplars(S: np.ndarray, max_size: int | None = None) -> tuple[int, ...]:
    """Exemplar set maximizing net similarity, by enumeration of every subset."""
    n = len(S)
    best, best_val = (), -math.inf
    for size in range(1, (max_size or n) + 1):
        for ex in itertools.combinations(range(n), size):
            val = 0.0
            for i in range(n):
                val += S[i, i] if i in ex else max(S[i, k] for k in ex)
            if val > best_val + 1e-12:
                best, best_val = ex, val
    return best


def three_blobs(rng: np.random.Generator, spread: float = 0.05, dim: int = 2):
    """Nine points, three per blob; centres at least 2 apart with comparable gaps.

    Comparable gaps (shortest >= 0.6 x longest) keep three clusters optimal
    under the median preference; a much closer pair would rightly merge.
    """
    while True:
        centres = rng.uniform(-5, 5, size=(3, dim))
        gaps = [np.linalg.norm(centres[a] - centres[b]) for a, b in ((0, 1), (0, 2), (1, 2))]
        if min(gaps) >= 2.0 and min(gaps) >= 0.6 * max(gaps):
            break
    pts = np.repeat(centres, 3, axis=0) + rng.normal(0, spread, size=(9, dim))
    return pts, np.repeat(np.arange(3), 3)
