"""Planar pose algebra and differential-drive forward kinematics.

Three integrators are provided for a constant wheel command held over ``dt``:
the exact circular-arc solution, a first-order Euler step and a second-order
Runge-Kutta (midpoint heading) step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# |w| below this uses the straight-line branch of the exact integrator
STRAIGHT_EPS = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite pose {self.x}, {self.y}, {self.theta}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, a) -> "Pose2D":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


IDENTITY = Pose2D(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class WheelCommand:
    """Left/right wheel angular speeds in rad/s."""

    omega_left: float = 0.0
    omega_right: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega_left) and math.isfinite(self.omega_right)):
            raise ValueError("wheel command must be finite")
        object.__setattr__(self, "omega_left", float(self.omega_left))
        object.__setattr__(self, "omega_right", float(self.omega_right))

    def magnitude(self) -> float:
        """Infinity norm of the two wheel speeds."""
        return max(abs(self.omega_left), abs(self.omega_right))

    def clipped(self, limit: float) -> "WheelCommand":
        return WheelCommand(
            min(max(self.omega_left, -limit), limit),
            min(max(self.omega_right, -limit), limit),
        )


STOP = WheelCommand(0.0, 0.0)


@dataclass(frozen=True)
class RobotModel:
    wheel_radius: float = 0.098
    track_width: float = 0.37
    max_wheel_speed: float = 16.0

    def __post_init__(self):
        if not self.wheel_radius > 0 or not self.track_width > 0:
            raise ValueError("wheel_radius and track_width must be positive")
        if not self.max_wheel_speed > 0:
            raise ValueError("max_wheel_speed must be positive")

    @property
    def max_linear_speed(self) -> float:
        return self.wheel_radius * self.max_wheel_speed

    def wheels_for_twist(self, v: float, w: float) -> WheelCommand:
        """Inverse of :func:`body_twist`."""
        half = 0.5 * w * self.track_width
        return WheelCommand((v - half) / self.wheel_radius, (v + half) / self.wheel_radius)


def body_twist(cmd: WheelCommand, model: RobotModel,
               scale_left: float = 1.0, scale_right: float = 1.0) -> tuple[float, float]:
    """Linear and angular body velocity for a wheel command.

    ``scale_left``/``scale_right`` multiply the effective radius of each wheel.
    """
    vl = model.wheel_radius * scale_left * cmd.omega_left
    vr = model.wheel_radius * scale_right * cmd.omega_right
    return 0.5 * (vl + vr), (vr - vl) / model.track_width


def arc_step(x: float, y: float, theta: float, v: float, w: float, dt: float):
    """Exact constant-twist motion; returns raw (x, y, theta) without wrapping."""
    if abs(w) < STRAIGHT_EPS:
        return x + v * math.cos(theta) * dt, y + v * math.sin(theta) * dt, theta + w * dt
    th1 = theta + w * dt
    rad = v / w
    return x + rad * (math.sin(th1) - math.sin(theta)), y - rad * (math.cos(th1) - math.cos(theta)), th1


def integrate_twist_exact(start: Pose2D, v: float, w: float, dt: float) -> Pose2D:
    return Pose2D(*arc_step(start.x, start.y, start.theta, v, w, dt))


def integrate_exact(start: Pose2D, cmd: WheelCommand, model: RobotModel, dt: float) -> Pose2D:
    v, w = body_twist(cmd, model)
    return integrate_twist_exact(start, v, w, dt)


def integrate_euler(start: Pose2D, cmd: WheelCommand, model: RobotModel, dt: float) -> Pose2D:
    v, w = body_twist(cmd, model)
    th = start.theta
    return Pose2D(start.x + v * math.cos(th) * dt, start.y + v * math.sin(th) * dt, th + w * dt)


def integrate_rk2(start: Pose2D, cmd: WheelCommand, model: RobotModel, dt: float) -> Pose2D:
    v, w = body_twist(cmd, model)
    mid = start.theta + 0.5 * w * dt
    return Pose2D(start.x + v * math.cos(mid) * dt, start.y + v * math.sin(mid) * dt, start.theta + w * dt)


def pose_compose(a: Pose2D, b: Pose2D) -> Pose2D:
    """``a`` followed by ``b`` expressed in ``a``'s frame."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2D(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta)


def pose_relative(a: Pose2D, b: Pose2D) -> Pose2D:
    """Pose of ``b`` in the frame of ``a``, so that ``compose(a, relative(a, b)) == b``."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    dx, dy = b.x - a.x, b.y - a.y
    return Pose2D(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta)


def compose_many(base: Pose2D, rel: np.ndarray) -> np.ndarray:
    """Vectorised compose of ``base`` with an ``(..., 3)`` array of relative poses."""
    c, s = math.cos(base.theta), math.sin(base.theta)
    out = np.empty_like(rel, dtype=float)
    out[..., 0] = base.x + c * rel[..., 0] - s * rel[..., 1]
    out[..., 1] = base.y + s * rel[..., 0] + c * rel[..., 1]
    out[..., 2] = wrap_angles(base.theta + rel[..., 2])
    return out
