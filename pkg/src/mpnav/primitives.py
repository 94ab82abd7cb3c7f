"""Motion primitives: segmentation of driven logs, featurization and replay."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import Pose2D, RobotModel, WheelCommand, pose_relative, wrap_angles

DEADBAND = 0.05
N_FEATURE_SAMPLES = 5
FEATURE_DIM = 5 * N_FEATURE_SAMPLES


@dataclass(frozen=True)
class LogRow:
    t: float
    cmd: WheelCommand
    pose: Pose2D


@dataclass
class MotionPrimitive:
    """Timed commands plus the origin-normalized pose trace they produced.

    ``controls[k]`` is held from its time until the next control time (or the
    end of the primitive). ``poses[0]`` is the identity.
    """

    controls: list[tuple[float, WheelCommand]]
    poses: list[tuple[float, Pose2D]]
    id: int = 0

    def __post_init__(self):
        if not self.controls:
            raise ValueError("motion primitive needs at least one control")
        if len(self.poses) < 2:
            raise ValueError("motion primitive needs at least two poses")
        p0 = self.poses[0][1]
        if self.poses[0][0] != 0.0 or (p0.x, p0.y, p0.theta) != (0.0, 0.0, 0.0):
            raise ValueError("pose trace must start at the identity at t=0")
        ts = [t for t, _ in self.poses]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("pose times must be strictly increasing")
        self._trace: np.ndarray | None = None

    @property
    def duration(self) -> float:
        return self.poses[-1][0]

    @property
    def end_pose(self) -> Pose2D:
        return self.poses[-1][1]

    def trace_array(self) -> np.ndarray:
        """(n, 3) array of the relative poses."""
        if self._trace is None:
            self._trace = np.array([[p.x, p.y, p.theta] for _, p in self.poses])
        return self._trace

    def arc_length(self) -> float:
        xy = self.trace_array()[:, :2]
        return float(np.sum(np.hypot(*np.diff(xy, axis=0).T)))

    def control_at(self, t: float) -> WheelCommand:
        """Zero-order hold lookup."""
        cmd = self.controls[0][1]
        for tc, c in self.controls:
            if tc <= t + 1e-12:
                cmd = c
            else:
                break
        return cmd

    def with_id(self, new_id: int) -> "MotionPrimitive":
        return MotionPrimitive(list(self.controls), list(self.poses), new_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "controls": [[t, c.omega_left, c.omega_right] for t, c in self.controls],
            "poses": [[t, p.x, p.y, p.theta] for t, p in self.poses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionPrimitive":
        return cls([(float(t), WheelCommand(l, r)) for t, l, r in d["controls"]],
                   [(float(t), Pose2D(x, y, th)) for t, x, y, th in d["poses"]],
                   int(d["id"]))


def is_moving(cmd: WheelCommand, deadband: float = DEADBAND) -> bool:
    return cmd.magnitude() > deadband


def _window_to_mp(rows: Sequence[LogRow], a: int, b: int, mp_id: int) -> MotionPrimitive:
    # rows[a..b] inclusive are poses; commands of rows[a..b-1] drive between them
    t0, p0 = rows[a].t, rows[a].pose
    controls = [(rows[k].t - t0, rows[k].cmd) for k in range(a, b)]
    poses = [(0.0, Pose2D())] + [(rows[k].t - t0, pose_relative(p0, rows[k].pose)) for k in range(a + 1, b + 1)]
    return MotionPrimitive(controls, poses, mp_id)


def generate_mps(log: Sequence[LogRow], delta_t: float = 1.0, deadband: float = DEADBAND,
                 first_id: int = 0) -> list[MotionPrimitive]:
    """Chop every moving stretch of a log into ``delta_t`` windows.

    A moving stretch is a maximal run of rows whose command exceeds the
    dead-band; it ends at the pose of the first stopped row after it (or the
    last row). A trailing window shorter than half ``delta_t`` is dropped.
    """
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    rows = list(log)
    for r0, r1 in zip(rows, rows[1:]):
        if not r1.t > r0.t:
            raise ValueError("log timestamps must be strictly increasing")
    mps: list[MotionPrimitive] = []
    n = len(rows)
    k = 0
    eps = 1e-9
    while k < n:
        if not is_moving(rows[k].cmd, deadband):
            k += 1
            continue
        start = k
        while k < n and is_moving(rows[k].cmd, deadband):
            k += 1
        end = min(k, n - 1)  # pose index closing the stretch
        a = start
        while a < end:
            b = a
            while b < end and rows[b].t - rows[a].t < delta_t - eps:
                b += 1
            if rows[b].t - rows[a].t >= 0.5 * delta_t - eps:
                mps.append(_window_to_mp(rows, a, b, first_id + len(mps)))
            a = b
    return mps


@dataclass(frozen=True)
class FeatureScale:
    """Per-dimension normalizers for MP features."""

    wheel: float = 16.0
    position: float = 0.098 * 16.0 * 1.0
    heading: float = math.pi

    @classmethod
    def for_model(cls, model: RobotModel, delta_t: float = 1.0) -> "FeatureScale":
        return cls(model.max_wheel_speed, model.max_linear_speed * delta_t, math.pi)


DEFAULT_SCALE = FeatureScale()


def _interp_angle(ts: np.ndarray, th: np.ndarray, at: np.ndarray) -> np.ndarray:
    unwrapped = np.unwrap(th)
    return wrap_angles(np.interp(at, ts, unwrapped))


def feature_samples(mp: MotionPrimitive) -> np.ndarray:
    """Raw (5, 5) samples of (wl, wr, x, y, theta) at 0, T/4, T/2, 3T/4, T."""
    T = mp.duration
    at = np.linspace(0.0, T, N_FEATURE_SAMPLES)
    tc = np.array([t for t, _ in mp.controls])
    wl = np.array([c.omega_left for _, c in mp.controls])
    wr = np.array([c.omega_right for _, c in mp.controls])
    tp = np.array([t for t, _ in mp.poses])
    tr = mp.trace_array()
    out = np.empty((N_FEATURE_SAMPLES, 5))
    out[:, 0] = np.interp(at, tc, wl)
    out[:, 1] = np.interp(at, tc, wr)
    out[:, 2] = np.interp(at, tp, tr[:, 0])
    out[:, 3] = np.interp(at, tp, tr[:, 1])
    out[:, 4] = _interp_angle(tp, tr[:, 2], at)
    return out


def featurize(mp: MotionPrimitive, scale: FeatureScale = DEFAULT_SCALE) -> np.ndarray:
    """25-vector, interleaved per sample time and scaled by ``scale``."""
    raw = feature_samples(mp)
    norm = np.array([scale.wheel, scale.wheel, scale.position, scale.position, scale.heading])
    return (raw / norm).reshape(-1)


def replay_controls(mp: MotionPrimitive, dt: float = 0.05) -> Iterable[tuple[float, WheelCommand, float]]:
    """Yield ``(t_rel, command, step)`` covering the primitive's duration.

    Each stored command is held until the next stored time; steps never exceed
    ``dt`` and land exactly on stored control times.
    """
    times = [t for t, _ in mp.controls] + [mp.duration]
    for (t0, cmd), t1 in zip(mp.controls, times[1:]):
        span = t1 - t0
        if span <= 0:
            continue
        n = max(1, int(math.ceil(span / dt - 1e-9)))
        h = span / n
        for i in range(n):
            yield t0 + i * h, cmd, h


def load_log_csv(path) -> list[LogRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(LogRow(float(rec["t"]), WheelCommand(float(rec["wl_cmd"]), float(rec["wr_cmd"])),
                               Pose2D(float(rec["x"]), float(rec["y"]), float(rec["theta"]))))
    return rows


def save_log_csv(path, rows: Sequence[LogRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "wl_cmd", "wr_cmd", "x", "y", "theta"])
        for r in rows:
            w.writerow([repr(r.t), repr(r.cmd.omega_left), repr(r.cmd.omega_right),
                        repr(r.pose.x), repr(r.pose.y), repr(r.pose.theta)])


def save_library(path, mps: Sequence[MotionPrimitive], **meta) -> None:
    doc = {"meta": meta, "primitives": [m.to_dict() for m in mps]}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_library(path) -> tuple[list[MotionPrimitive], dict]:
    doc = json.loads(Path(path).read_text())
    return [MotionPrimitive.from_dict(d) for d in doc["primitives"]], doc.get("meta", {})
