"""Closed-loop differential-drive simulator with hidden locomotion degradation.

The simulator applies a :class:`DegradationProfile` to every command before
integrating the true motion, reports (optionally noisy) localization, and
checks the robot's disc footprint against an :class:`OccupancyGrid`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import Pose2D, RobotModel, WheelCommand, arc_step, body_twist

INF = math.inf


@dataclass(frozen=True)
class DegradationProfile:
    cap_left: float = INF
    cap_right: float = INF
    radius_scale_left: float = 1.0
    radius_scale_right: float = 1.0

    def __post_init__(self):
        if self.cap_left < 0 or self.cap_right < 0:
            raise ValueError("wheel caps must be non-negative")
        if not (self.radius_scale_left > 0 and self.radius_scale_right > 0):
            raise ValueError("radius scales must be positive")

    @property
    def is_normal(self) -> bool:
        return (self.cap_left == INF and self.cap_right == INF
                and self.radius_scale_left == 1.0 and self.radius_scale_right == 1.0)


NORMAL = DegradationProfile()

PROFILES = {
    "normal": NORMAL,
    "right_constrained": DegradationProfile(cap_right=5.0),
    "left_constrained": DegradationProfile(cap_left=5.0),
    "overload": DegradationProfile(cap_left=5.0, cap_right=5.0),
}


def profile_from_dict(d: dict) -> DegradationProfile:
    def cap(v):
        return INF if v is None or v == "inf" else float(v)

    return DegradationProfile(cap(d.get("cap_left")), cap(d.get("cap_right")),
                              float(d.get("radius_scale_left", 1.0)),
                              float(d.get("radius_scale_right", 1.0)))


def resolve_profile(profile) -> DegradationProfile:
    if isinstance(profile, DegradationProfile):
        return profile
    if isinstance(profile, dict):
        return profile_from_dict(profile)
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}") from None


def apply_degradation(cmd: WheelCommand, profile: DegradationProfile) -> WheelCommand:
    """Saturate each wheel at its side's cap (radius scaling acts later, on the twist)."""
    return WheelCommand(min(max(cmd.omega_left, -profile.cap_left), profile.cap_left),
                        min(max(cmd.omega_right, -profile.cap_right), profile.cap_right))


def true_twist(cmd: WheelCommand, profile: DegradationProfile, model: RobotModel) -> tuple[float, float]:
    eff = apply_degradation(cmd.clipped(model.max_wheel_speed), profile)
    return body_twist(eff, model, profile.radius_scale_left, profile.radius_scale_right)


class OccupancyGrid:
    """Boolean occupancy grid; cell (i, j) covers x in [ox + i*res, ox + (i+1)*res)."""

    def __init__(self, occupied: np.ndarray, resolution: float = 0.05,
                 origin: tuple[float, float] = (0.0, 0.0)):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        occ = np.asarray(occupied, dtype=bool)
        if occ.ndim != 2:
            raise ValueError("occupancy must be a 2-D array indexed [ix, iy]")
        self.occupied = occ
        self.resolution = float(resolution)
        self.origin = Pose2D(float(origin[0]), float(origin[1]), 0.0)
        self._inflated: dict[float, np.ndarray] = {}

    @property
    def width(self) -> int:
        return self.occupied.shape[0]

    @property
    def height(self) -> int:
        return self.occupied.shape[1]

    @classmethod
    def empty(cls, width_m: float = 10.0, height_m: float = 10.0, resolution: float = 0.05,
              origin: tuple[float, float] = (-5.0, -5.0)) -> "OccupancyGrid":
        shape = (int(round(width_m / resolution)), int(round(height_m / resolution)))
        return cls(np.zeros(shape, dtype=bool), resolution, origin)

    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin.x, self.origin.y
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((x - self.origin.x) / self.resolution)),
                int(math.floor((y - self.origin.y) / self.resolution)))

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin.x + (i + 0.5) * self.resolution,
                self.origin.y + (j + 0.5) * self.resolution)

    def in_bounds(self, x: float, y: float) -> bool:
        i, j = self.world_to_cell(x, y)
        return 0 <= i < self.width and 0 <= j < self.height

    def set_box(self, x0: float, y0: float, x1: float, y1: float, value: bool = True) -> None:
        """Mark every cell whose centre lies in the box."""
        xs = self.origin.x + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin.y + (np.arange(self.height) + 0.5) * self.resolution
        mi = (xs >= x0) & (xs <= x1)
        mj = (ys >= y0) & (ys <= y1)
        self.occupied[np.ix_(mi, mj)] = value
        self._inflated.clear()

    def disc_collides(self, x: float, y: float, radius: float) -> bool:
        """Exact test of a disc against occupied cells; off-grid centres collide."""
        if not self.in_bounds(x, y):
            return True
        res = self.resolution
        n = int(math.ceil(radius / res)) + 1
        ci, cj = self.world_to_cell(x, y)
        i0, i1 = max(ci - n, 0), min(ci + n + 1, self.width)
        j0, j1 = max(cj - n, 0), min(cj + n + 1, self.height)
        ii, jj = np.nonzero(self.occupied[i0:i1, j0:j1])
        if ii.size == 0:
            return False
        lo_x = self.origin.x + (ii + i0) * res
        lo_y = self.origin.y + (jj + j0) * res
        dx = np.maximum(np.maximum(lo_x - x, 0.0), x - (lo_x + res))
        dy = np.maximum(np.maximum(lo_y - y, 0.0), y - (lo_y + res))
        return bool(np.any(dx * dx + dy * dy <= radius * radius))

    def inflated(self, radius: float) -> np.ndarray:
        """Conservative per-cell blocked mask for a disc of ``radius`` centred anywhere in the cell."""
        key = float(radius)
        if key not in self._inflated:
            if not self.occupied.any():
                mask = np.zeros_like(self.occupied)
            else:
                dist = ndimage.distance_transform_edt(~self.occupied) * self.resolution
                mask = dist <= radius + self.resolution * math.sqrt(2.0)
            self._inflated[key] = mask
        return self._inflated[key]

    def blocked_points(self, xy: np.ndarray, radius: float) -> np.ndarray:
        """Vectorised conservative collision lookup for points of shape (..., 2)."""
        mask = self.inflated(radius)
        i = np.floor((xy[..., 0] - self.origin.x) / self.resolution).astype(np.int64)
        j = np.floor((xy[..., 1] - self.origin.y) / self.resolution).astype(np.int64)
        inside = (i >= 0) & (i < self.width) & (j >= 0) & (j < self.height)
        out = ~inside
        out[inside] = mask[i[inside], j[inside]]
        return out

    # ASCII map: header "resolution width height origin_x origin_y", then rows
    # from top (max y) to bottom, '#' occupied and '.' free.
    def to_text(self) -> str:
        lines = [f"{self.resolution:g} {self.width} {self.height} {self.origin.x:g} {self.origin.y:g}"]
        for j in range(self.height - 1, -1, -1):
            lines.append("".join("#" if self.occupied[i, j] else "." for i in range(self.width)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "OccupancyGrid":
        rows = [ln.rstrip("\r\n") for ln in text.splitlines() if ln.strip()]
        if not rows:
            raise ValueError("empty grid file")
        head = rows[0].split()
        if len(head) != 5:
            raise ValueError("grid header must be 'resolution width height origin_x origin_y'")
        res, w, h = float(head[0]), int(head[1]), int(head[2])
        body = rows[1:]
        if len(body) != h or any(len(r) != w for r in body):
            raise ValueError(f"grid body does not match declared size {w}x{h}")
        occ = np.zeros((w, h), dtype=bool)
        for row_idx, row in enumerate(body):
            j = h - 1 - row_idx
            for i, ch in enumerate(row):
                if ch == "#":
                    occ[i, j] = True
                elif ch != ".":
                    raise ValueError(f"unexpected grid character {ch!r}")
        return cls(occ, res, (float(head[3]), float(head[4])))

    @classmethod
    def load(cls, path) -> "OccupancyGrid":
        return cls.from_text(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


@dataclass
class SimState:
    true_pose: Pose2D = field(default_factory=Pose2D)
    clock: float = 0.0
    rng_seed: int = 0


@dataclass(frozen=True)
class StepRecord:
    t: float
    pose: Pose2D
    cmd: WheelCommand
    effective: WheelCommand


def step(state: SimState, cmd: WheelCommand, dt: float, profile: DegradationProfile,
         model: RobotModel, grid: OccupancyGrid | None, footprint: float = 0.25) -> tuple[SimState, bool]:
    if not dt > 0:
        raise ValueError("dt must be positive")
    v, w = true_twist(cmd, profile, model)
    p = state.true_pose
    pose = Pose2D(*arc_step(p.x, p.y, p.theta, v, w, dt))
    collided = grid is not None and grid.disc_collides(pose.x, pose.y, footprint)
    return SimState(pose, state.clock + dt, state.rng_seed), collided


class Simulator:
    """Stateful wrapper around :func:`step` with a seeded localization noise source."""

    def __init__(self, model: RobotModel | None = None, profile=NORMAL,
                 grid: OccupancyGrid | None = None, start: Pose2D | None = None,
                 seed: int = 0, noise_std: tuple[float, float, float] = (0.0, 0.0, 0.0),
                 dt: float = 0.05, footprint: float = 0.25):
        self.model = model or RobotModel()
        self.profile = resolve_profile(profile)
        self.grid = grid
        self.dt = dt
        self.footprint = footprint
        self.noise_std = tuple(noise_std)
        self.state = SimState(start or Pose2D(), 0.0, seed)
        self.rng = np.random.default_rng(seed)
        self.initial_pose = self.state.true_pose
        self.odometer = 0.0  # true distance travelled
        self.collided = False
        self.history: list[StepRecord] = []

    @property
    def pose(self) -> Pose2D:
        return self.state.true_pose

    @property
    def clock(self) -> float:
        return self.state.clock

    def step(self, cmd: WheelCommand, dt: float | None = None) -> bool:
        dt = self.dt if dt is None else dt
        eff = apply_degradation(cmd.clipped(self.model.max_wheel_speed), self.profile)
        self.state, hit = step(self.state, cmd, dt, self.profile, self.model, self.grid, self.footprint)
        # a constant-twist step covers exactly |v| * dt of arc
        self.odometer += abs(true_twist(cmd, self.profile, self.model)[0]) * dt
        self.history.append(StepRecord(self.state.clock, self.state.true_pose, cmd, eff))
        self.collided = self.collided or hit
        return hit

    def localize(self) -> Pose2D:
        return localize(self.state, self.noise_std, self.rng)


def localize(state: SimState, noise_std=(0.0, 0.0, 0.0), rng: np.random.Generator | None = None) -> Pose2D:
    """True pose plus zero-mean Gaussian noise; exact when all std are zero."""
    sx, sy, st = noise_std
    if sx == 0 and sy == 0 and st == 0:
        return state.true_pose
    if rng is None:
        rng = np.random.default_rng(state.rng_seed)
    n = rng.normal(0.0, 1.0, size=3) * np.array([sx, sy, st])
    p = state.true_pose
    return Pose2D(p.x + n[0], p.y + n[1], p.theta + n[2])


@dataclass
class Scenario:
    """Scenario configuration as read from a JSON key-value file."""

    profile: str | dict = "normal"
    goals: list[tuple[float, float]] = field(default_factory=lambda: [(3.0, 2.0), (3.0, -2.0)])
    noise_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    grid: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        sc = cls()
        for k, v in d.items():
            if not hasattr(sc, k):
                raise ValueError(f"unknown scenario key {k!r}")
            if k == "goals":
                v = [tuple(map(float, g)) for g in v]
            elif k in ("noise_std", "start"):
                v = tuple(map(float, v))
            sc = replace(sc, **{k: v})
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))
