"""Plan, execute, check and vote: the adaptive navigation loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import ACTIVE, CANDIDATE, MPCluster
from .geometry import Pose2D, pose_compose, pose_relative, wrap_angle
from .planner import (MPLibrary, PenaltyGrid, Plan, PlannerConfig, PlanningError, plan_astar,
                      update_penalty)
from .primitives import DEFAULT_SCALE, FeatureScale, MotionPrimitive, featurize, replay_controls
from .sim import Simulator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdaptiveConfig:
    tol_pos: float = 0.15
    tol_theta: float = 0.2
    cccmp_tol: float = 0.5
    promote_threshold: int = 3
    demote_threshold: int = -2
    max_active: int = 40
    max_plans: int = 20
    time_budget: float = 20.0  # simulated seconds
    replan_on_inconsistency: bool = True
    planner: PlannerConfig = PlannerConfig()
    beta: float = 1.0
    decay: float = 0.5


@dataclass
class StepRecord:
    mp_id: int
    designed_end: Pose2D
    executed_end: Pose2D
    consistent: bool
    executed_mp: MotionPrimitive | None = None


@dataclass
class ExecutionReport:
    records: list[StepRecord] = field(default_factory=list)
    trace: list[tuple[float, Pose2D]] = field(default_factory=list)
    collided: bool = False
    timed_out: bool = False

    @property
    def executed_mps(self) -> int:
        return len(self.records)


def ccdmp(designed: MotionPrimitive, executed_segment: Sequence[Pose2D],
          tol_pos: float = 0.15, tol_theta: float = 0.2) -> bool:
    """Did executing ``designed`` end where it promised, within closed tolerances?"""
    rel = pose_relative(executed_segment[0], executed_segment[-1])
    want = designed.end_pose
    err_pos = math.hypot(rel.x - want.x, rel.y - want.y)
    err_th = abs(wrap_angle(rel.theta - want.theta))
    eps = 1e-12
    return err_pos <= tol_pos + eps and err_th <= tol_theta + eps


def cccmp(executed_mp: MotionPrimitive, candidates: Sequence[MPCluster], tol: float = 0.5,
          scale: FeatureScale = DEFAULT_SCALE) -> int | None:
    """Exemplar id of the nearest candidate cluster within ``tol`` in feature space."""
    if not candidates:
        return None
    f = featurize(executed_mp, scale)
    best, best_d = None, math.inf
    for c in sorted(candidates, key=lambda c: c.exemplar_id):
        d = float(np.linalg.norm(featurize(c.exemplar, scale) - f))
        if d <= tol and d < best_d:
            best, best_d = c.exemplar_id, d
    return best


class VoteLedger:
    """Cluster scores with promote/demote thresholds and a floor rule."""

    def __init__(self, clusters: Sequence[MPCluster], promote_threshold: int = 3,
                 demote_threshold: int = -2):
        self.clusters: list[MPCluster] = list(clusters)
        self.promote_threshold = promote_threshold
        self.demote_threshold = demote_threshold
        self._next_id = max((m for c in self.clusters for m in c.member_ids), default=-1) + 1
        self.log: list[tuple[str, int]] = []

    def by_id(self, exemplar_id: int) -> MPCluster:
        for c in self.clusters:
            if c.exemplar_id == exemplar_id:
                return c
        raise KeyError(exemplar_id)

    def active(self) -> list[MPCluster]:
        return [c for c in self.clusters if c.status == ACTIVE]

    def candidates(self) -> list[MPCluster]:
        return [c for c in self.clusters if c.status == CANDIDATE]

    def enabled(self, max_active: int | None = None) -> list[MPCluster]:
        """Enabled active clusters, highest vote first (ties by id)."""
        en = sorted((c for c in self.active() if c.enabled), key=lambda c: (-c.votes, c.exemplar_id))
        return en if max_active is None else en[:max_active]

    def new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def snapshot(self) -> str:
        return ";".join(f"{c.exemplar_id}:{c.votes}:{c.status[0]}{'' if c.enabled else 'x'}"
                        for c in self.clusters)

    def add_candidate(self, mp: MotionPrimitive) -> MPCluster:
        mp = mp.with_id(self.new_id())
        c = MPCluster(mp.id, {mp.id}, 1, CANDIDATE, mp)
        self.clusters.append(c)
        self.log.append(("new_candidate", mp.id))
        return c

    def apply(self, record: StepRecord, tol: float = 0.5, scale: FeatureScale = DEFAULT_SCALE) -> None:
        """Apply one execution record: upvote, or downvote plus new/upvoted candidate."""
        cluster = self.by_id(record.mp_id)
        if record.consistent:
            cluster.votes += 1
            self.log.append(("upvote", cluster.exemplar_id))
        else:
            cluster.votes -= 1
            self.log.append(("downvote", cluster.exemplar_id))
            if record.executed_mp is not None:
                match = cccmp(record.executed_mp, self.candidates(), tol, scale)
                if match is None:
                    self.add_candidate(record.executed_mp)
                else:
                    self.by_id(match).votes += 1
                    self.log.append(("upvote_candidate", match))
        self._transitions()

    def _transitions(self) -> None:
        for c in self.candidates():
            if c.votes >= self.promote_threshold:
                c.status = ACTIVE
                c.enabled = True
                self.log.append(("promote", c.exemplar_id))
        for c in sorted(self.active(), key=lambda c: (c.votes, c.exemplar_id)):
            if c.enabled and c.votes <= self.demote_threshold:
                if len(self.enabled()) > 1:
                    c.enabled = False
                    self.log.append(("disable", c.exemplar_id))
            elif not c.enabled and c.votes > self.demote_threshold:
                c.enabled = True
                self.log.append(("enable", c.exemplar_id))
        if not self.enabled() and self.active():
            best = max(self.active(), key=lambda c: (c.votes, -c.exemplar_id))
            best.enabled = True


def vote_update(ledger: VoteLedger, report: ExecutionReport, tol: float = 0.5,
                scale: FeatureScale = DEFAULT_SCALE) -> VoteLedger:
    for rec in report.records:
        ledger.apply(rec, tol, scale)
    return ledger


def execute_plan(plan: Plan, primitives: dict[int, MotionPrimitive], sim: Simulator,
                 config: AdaptiveConfig = AdaptiveConfig(), deadline: float = math.inf) -> ExecutionReport:
    """Replay the plan's primitives one by one, checking each against its design.

    Stops early on collision, on the deadline (simulated time) and, when
    configured, after the first inconsistent primitive.
    """
    if not plan.actions:
        raise ValueError("cannot execute an empty plan")
    report = ExecutionReport()
    report.trace.append((sim.clock, sim.localize()))
    for mp_id in plan.actions:
        mp = primitives[mp_id]
        t0 = sim.clock
        start = sim.localize()
        seg = [start]
        seg_t = [0.0]
        for _, cmd, h in replay_controls(mp, sim.dt):
            hit = sim.step(cmd, h)
            p = sim.localize()
            seg.append(p)
            seg_t.append(sim.clock - t0)
            report.trace.append((sim.clock, p))
            if hit:
                report.collided = True
                break
            if sim.clock >= deadline - 1e-9:
                report.timed_out = sim.clock - t0 < mp.duration - 1e-9
                break
        if report.collided or report.timed_out:
            break
        designed_end = pose_compose(start, mp.end_pose)
        ok = ccdmp(mp, seg, config.tol_pos, config.tol_theta)
        observed = MotionPrimitive(
            list(mp.controls),
            [(0.0, Pose2D())] + [(t, pose_relative(start, p)) for t, p in zip(seg_t[1:], seg[1:])],
            mp.id)
        report.records.append(StepRecord(mp_id, designed_end, seg[-1], ok, observed))
        if not ok and config.replan_on_inconsistency:
            break
        if sim.clock >= deadline - 1e-9:
            break
    return report


@dataclass
class NavigationResult:
    reached: bool
    trace: list[tuple[float, Pose2D]]
    metrics: dict
    ledger: VoteLedger
    events: list[dict] = field(default_factory=list)
    failure: str | None = None

    def save_events_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "plan_length", "executed", "consistent", "collided", "ledger"])
            for e in self.events:
                w.writerow([e["iteration"], f"{e['plan_length']:.6f}", e["executed"], e["consistent"],
                            int(e["collided"]), e["ledger"]])


def adaptive_navigate(start: Pose2D, goal: tuple[float, float], clusters: Sequence[MPCluster],
                      sim: Simulator, config: AdaptiveConfig = AdaptiveConfig(),
                      ledger: VoteLedger | None = None, penalty: PenaltyGrid | None = None,
                      scale: FeatureScale = DEFAULT_SCALE) -> NavigationResult:
    """Re-plan with the best-voted clusters until the goal ball or a limit is reached.

    ``start`` is where the simulator's robot is assumed to be; the loop
    always plans from the localized pose.
    """
    if ledger is None:
        ledger = VoteLedger(clusters, config.promote_threshold, config.demote_threshold)
    if penalty is None:
        penalty = PenaltyGrid(config.planner.cell_size, config.beta, config.decay)
    t_start = sim.clock
    odo_start = sim.odometer
    promoted_before = sum(1 for e in ledger.log if e[0] == "promote")
    deadline = t_start + config.time_budget
    trace: list[tuple[float, Pose2D]] = [(sim.clock, sim.localize())]
    events: list[dict] = []
    failure = None
    reached = False
    plans = 0
    while True:
        here = sim.localize()
        if here.distance_to(Pose2D(goal[0], goal[1])) <= config.planner.goal_tolerance:
            reached = True
            break
        if plans >= config.max_plans:
            failure = "retry limit"
            break
        if sim.clock >= deadline - 1e-9:
            failure = "time budget"
            break
        enabled = ledger.enabled(config.max_active)
        prims = {c.exemplar_id: c.exemplar for c in enabled}
        plans += 1
        try:
            plan = plan_astar(MPLibrary(list(prims.values())), here, goal, sim.grid, penalty, config.planner)
        except PlanningError as exc:
            failure = f"planning failed: {exc}"
            log.info("plan %d failed: %s", plans, exc)
            break
        report = execute_plan(plan, prims, sim, config, deadline)
        trace.extend(report.trace[1:])
        vote_update(ledger, report, config.cccmp_tol, scale)
        if report.collided:
            penalty = update_penalty(penalty, [p for _, p in report.trace], config.beta, config.decay)
        events.append({
            "iteration": plans,
            "plan_length": plan.length,
            "executed": len(report.records),
            "consistent": sum(r.consistent for r in report.records),
            "collided": report.collided,
            "ledger": ledger.snapshot(),
        })
        if report.collided:
            failure = "collision"
            break
    end = sim.pose
    metrics = {
        "path_length": sim.odometer - odo_start,
        "end_point": (end.x, end.y),
        "run_time": sim.clock - t_start,
        "distance_to_goal": math.hypot(goal[0] - end.x, goal[1] - end.y),
        "plans": plans,
        "promoted": sum(1 for e in ledger.log if e[0] == "promote") - promoted_before,
    }
    return NavigationResult(reached, trace, metrics, ledger, events, failure)
