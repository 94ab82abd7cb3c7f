"""Scripted pseudo-teleoperation used to seed the motion-primitive library.

The script is a schedule of joystick segments in twist space (v, w). A seeded
operator wander is layered on top so that, as with a human driver, no two
seconds of driving are exactly alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import LIBRARY_AP, APParams, MPCluster, build_clusters
from .geometry import STOP, RobotModel
from .primitives import LogRow, MotionPrimitive, generate_mps
from .sim import Simulator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Segment:
    """Joystick ramp from twist ``start`` to ``end`` over ``duration`` seconds."""

    duration: float
    start: tuple[float, float]
    end: tuple[float, float] | None = None

    @property
    def moving(self) -> bool:
        return self.start != (0.0, 0.0) or self.end not in (None, (0.0, 0.0))

    def twist_at(self, t: float) -> tuple[float, float]:
        end = self.start if self.end is None else self.end
        a = min(max(t / self.duration, 0.0), 1.0) if self.duration > 0 else 0.0
        return (self.start[0] + a * (end[0] - self.start[0]),
                self.start[1] + a * (end[1] - self.start[1]))


def stop(duration: float = 1.5) -> Segment:
    return Segment(duration, (0.0, 0.0))


def coverage_script() -> list[Segment]:
    """About 200 s: speed sweeps, straights, arcs both ways, curvature sweeps, spins."""
    s: list[Segment] = []
    s += [Segment(8.0, (0.2, 0.0), (1.4, 0.0)), stop(), Segment(8.0, (1.4, 0.0), (0.2, 0.0)), stop()]
    for v in (0.15, 0.3, 0.45, 0.7, 1.0, 1.3):
        s += [Segment(3.0, (v, 0.0)), stop()]
    for v in (0.2, 0.4, 0.8, 1.2):
        for w in (0.5, 1.2, 2.0):
            s += [Segment(2.5, (v, w)), stop(), Segment(2.5, (v, -w)), stop()]
    for v in (0.3, 1.0):
        s += [Segment(5.0, (v, 0.0), (v, 2.0)), stop(), Segment(5.0, (v, 0.0), (v, -2.0)), stop()]
    for w in (0.8, 1.5, 2.5):
        s += [Segment(2.0, (0.0, w)), stop(), Segment(2.0, (0.0, -w)), stop()]
    s += [Segment(2.0, (-0.3, 0.0)), stop()]
    s += [Segment(8.0, (0.5, 0.0), (0.5, 0.0)), stop(4.0)]
    return s


def script_duration(script: Sequence[Segment]) -> float:
    return sum(seg.duration for seg in script)


def drive_script(script: Sequence[Segment], sim: Simulator, wander: tuple[float, float] = (0.08, 0.25),
                 seed: int = 0, knot: float = 0.5) -> list[LogRow]:
    """Run the script through the simulator and log (t, command, localized pose).

    ``wander`` is the operator noise std in (m/s, rad/s), interpolated linearly
    between random knots ``knot`` seconds apart; stops are exact.
    """
    rng = np.random.default_rng(seed)
    model: RobotModel = sim.model
    rows: list[LogRow] = []
    for seg in script:
        n = max(1, int(round(seg.duration / sim.dt)))
        if seg.moving:
            n_knots = int(np.ceil(seg.duration / knot)) + 1
            kt = np.arange(n_knots) * knot
            kv = rng.normal(0.0, wander[0], n_knots)
            kw = rng.normal(0.0, wander[1], n_knots)
        for i in range(n):
            t = i * sim.dt
            if seg.moving:
                v, w = seg.twist_at(t)
                v += float(np.interp(t, kt, kv))
                w += float(np.interp(t, kt, kw))
                cmd = model.wheels_for_twist(v, w).clipped(model.max_wheel_speed)
            else:
                cmd = STOP
            rows.append(LogRow(sim.clock, cmd, sim.localize()))
            sim.step(cmd)
    rows.append(LogRow(sim.clock, STOP, sim.localize()))
    return rows


def teleop_generate(script: Sequence[Segment] | None = None, sim: Simulator | None = None,
                    delta_t: float = 1.0, ap: APParams = LIBRARY_AP, seed: int = 0,
                    wander: tuple[float, float] = (0.08, 0.25)) -> tuple[list[MotionPrimitive], list[MPCluster]]:
    """Drive the script under the simulator's (normal) profile, cut MPs and cluster them."""
    script = coverage_script() if script is None else script
    sim = sim or Simulator()
    rows = drive_script(script, sim, wander, seed)
    mps = generate_mps(rows, delta_t)
    if not mps:
        log.warning("teleop script produced no motion; library is empty")
    return mps, build_clusters(mps, ap)
