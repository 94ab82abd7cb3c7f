"""DWA-style local planner used as the comparison baseline.

It deliberately trusts the nominal robot model: the dynamic window is built
around the last *commanded* twist, and rollouts use undegraded kinematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, RobotModel, wrap_angles
from .sim import Simulator


@dataclass(frozen=True)
class DWAConfig:
    v_min: float = 0.0
    v_max: float = 1.0
    w_max: float = 2.0
    acc_v: float = 1.5
    acc_w: float = 4.0
    v_samples: int = 7
    w_samples: int = 15
    horizon: float = 1.5
    rollout_dt: float = 0.1
    heading_weight: float = 1.0
    goal_weight: float = 1.0
    velocity_weight: float = 0.3
    clearance_weight: float = 0.1
    goal_tolerance: float = 0.5
    time_cap: float = 20.0


@dataclass
class DWAResult:
    trace: list[tuple[float, Pose2D]]
    reached: bool
    collided: bool


def rollout(pose: Pose2D, v: np.ndarray, w: np.ndarray, horizon: float, step: float) -> np.ndarray:
    """Constant-twist rollouts; returns (n, k, 3) poses at k = horizon/step instants."""
    k = int(round(horizon / step))
    t = step * np.arange(1, k + 1)
    v = v[:, None]
    w = w[:, None]
    th = pose.theta + w * t
    small = np.abs(w) < 1e-9
    safe_w = np.where(small, 1.0, w)
    x_arc = pose.x + v / safe_w * (np.sin(th) - math.sin(pose.theta))
    y_arc = pose.y - v / safe_w * (np.cos(th) - math.cos(pose.theta))
    x_lin = pose.x + v * math.cos(pose.theta) * t
    y_lin = pose.y + v * math.sin(pose.theta) * t
    out = np.empty((v.shape[0], k, 3))
    out[..., 0] = np.where(small, x_lin, x_arc)
    out[..., 1] = np.where(small, y_lin, y_arc)
    out[..., 2] = wrap_angles(th)
    return out


def choose_twist(pose: Pose2D, current: tuple[float, float], goal: tuple[float, float],
                 sim: Simulator, model: RobotModel, cfg: DWAConfig, period: float) -> tuple[float, float]:
    v0, w0 = current
    vs = np.linspace(max(cfg.v_min, v0 - cfg.acc_v * period), min(cfg.v_max, v0 + cfg.acc_v * period), cfg.v_samples)
    ws = np.linspace(max(-cfg.w_max, w0 - cfg.acc_w * period), min(cfg.w_max, w0 + cfg.acc_w * period), cfg.w_samples)
    V, W = (a.ravel() for a in np.meshgrid(vs, ws, indexing="ij"))
    # the assumed model only admits twists whose wheel speeds fit the hardware
    half = 0.5 * W * model.track_width
    ok = np.maximum(np.abs(V - half), np.abs(V + half)) <= model.max_wheel_speed * model.wheel_radius + 1e-9
    V, W = V[ok], W[ok]
    traj = rollout(pose, V, W, cfg.horizon, cfg.rollout_dt)
    end = traj[:, -1]
    gx, gy = goal
    dist = np.hypot(gx - end[:, 0], gy - end[:, 1])
    bearing = np.arctan2(gy - end[:, 1], gx - end[:, 0])
    heading = np.abs(wrap_angles(bearing - end[:, 2])) / math.pi
    cost = cfg.goal_weight * dist + cfg.heading_weight * heading - cfg.velocity_weight * V / cfg.v_max
    if sim.grid is not None:
        blocked = sim.grid.blocked_points(traj[..., :2], sim.footprint)
        hit = blocked.any(axis=1)
        # earlier first hit -> less clearance
        first = np.where(hit, np.argmax(blocked, axis=1), traj.shape[1])
        cost = cost + cfg.clearance_weight * (1.0 - first / traj.shape[1])
        cost = np.where(hit, np.inf, cost)
    if not np.isfinite(cost).any():
        return 0.0, 0.0
    best = int(np.argmin(cost))
    return float(V[best]), float(W[best])


def baseline_dwa(start: Pose2D, goal: tuple[float, float], sim: Simulator,
                 model_assumed: RobotModel | None = None, cfg: DWAConfig = DWAConfig()) -> DWAResult:
    """Drive toward ``goal`` with DWA until the goal ball, a collision or the time cap."""
    model = model_assumed or sim.model
    t0 = sim.clock
    trace = [(sim.clock, sim.localize())]
    current = (0.0, 0.0)
    reached = False
    while sim.clock - t0 < cfg.time_cap - 1e-9:
        pose = sim.localize()
        if math.hypot(goal[0] - pose.x, goal[1] - pose.y) <= cfg.goal_tolerance:
            reached = True
            break
        current = choose_twist(pose, current, goal, sim, model, cfg, sim.dt)
        cmd = model.wheels_for_twist(*current).clipped(model.max_wheel_speed)
        if sim.step(cmd):
            trace.append((sim.clock, sim.localize()))
            return DWAResult(trace, False, True)
        trace.append((sim.clock, sim.localize()))
    if not reached:
        pose = sim.localize()
        reached = math.hypot(goal[0] - pose.x, goal[1] - pose.y) <= cfg.goal_tolerance
    return DWAResult(trace, reached, False)
