"""Scenario runner, result table and CSV report for the profile x goal x method matrix."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Sequence

from .adaptive import AdaptiveConfig, adaptive_navigate
from .clustering import LIBRARY_AP, APParams, MPCluster, build_clusters
from .dwa import DWAConfig, baseline_dwa
from .geometry import Pose2D, RobotModel
from .primitives import MotionPrimitive, load_library, save_library
from .sim import OccupancyGrid, Simulator, resolve_profile
from .teleop import teleop_generate

log = logging.getLogger(__name__)

PROFILE_ORDER = ("normal", "right_constrained", "left_constrained", "overload")
PROFILE_LABELS = {
    "normal": "Normal",
    "right_constrained": "Right Constrained",
    "left_constrained": "Left Constrained",
    "overload": "Overload",
}
METHODS = ("baseline", "ours")
GOALS = ((3.0, 2.0), (3.0, -2.0))


@dataclass(frozen=True)
class Config:
    seed: int = 0
    model: RobotModel = RobotModel()
    control_dt: float = 0.05
    footprint: float = 0.25
    noise_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    grid_size: tuple[float, float] = (10.0, 10.0)
    grid_resolution: float = 0.05
    grid_origin: tuple[float, float] = (-3.0, -5.0)
    grid_file: str | None = None
    delta_t: float = 1.0
    ap: APParams = LIBRARY_AP
    adaptive: AdaptiveConfig = AdaptiveConfig()
    dwa: DWAConfig = DWAConfig()
    success_threshold: float = 1.0
    time_cap: float = 20.0

    def make_grid(self) -> OccupancyGrid:
        if self.grid_file:
            return OccupancyGrid.load(self.grid_file)
        return OccupancyGrid.empty(*self.grid_size, self.grid_resolution, self.grid_origin)

    def make_sim(self, profile, start: Pose2D | None = None) -> Simulator:
        return Simulator(self.model, profile, self.make_grid(), start, self.seed, self.noise_std,
                         self.control_dt, self.footprint)


def _merge(obj, overrides: dict):
    """Recursively apply a JSON dict onto a (frozen) dataclass instance."""
    known = {f.name for f in fields(obj)}
    changes = {}
    for k, v in overrides.items():
        if k not in known:
            raise ValueError(f"unknown config key {k!r} for {type(obj).__name__}")
        cur = getattr(obj, k)
        if is_dataclass(cur) and isinstance(v, dict):
            v = _merge(cur, v)
        elif isinstance(cur, tuple) and isinstance(v, list):
            v = tuple(v)
        changes[k] = v
    return replace(obj, **changes)


def load_config(path=None, overrides: dict | None = None) -> Config:
    cfg = Config()
    if path:
        cfg = _merge(cfg, json.loads(Path(path).read_text()))
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def config_to_dict(cfg: Config) -> dict:
    return json.loads(json.dumps(asdict(cfg), default=str))


@dataclass
class ScenarioResult:
    method: str
    profile: str
    goal: tuple[float, float]
    path_length: float
    end_point: tuple[float, float]
    run_time: float
    distance_to_goal: float
    result: int
    trace: list = field(default_factory=list, repr=False)
    extra: dict = field(default_factory=dict, repr=False)


@dataclass
class Library:
    primitives: list[MotionPrimitive]
    clusters: list[MPCluster]

    def save(self, path, **meta) -> None:
        save_library(path, self.primitives, **meta)
        doc = json.loads(Path(path).read_text())
        doc["clusters"] = [{"exemplar_id": c.exemplar_id, "member_ids": sorted(c.member_ids)}
                           for c in self.clusters]
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path, ap: APParams = LIBRARY_AP) -> "Library":
        mps, _ = load_library(path)
        doc = json.loads(Path(path).read_text())
        by_id = {m.id: m for m in mps}
        if doc.get("clusters"):
            clusters = [MPCluster(c["exemplar_id"], set(c["member_ids"]), 0, "active", by_id[c["exemplar_id"]])
                        for c in doc["clusters"]]
        else:
            clusters = build_clusters(mps, ap)
        return cls(mps, clusters)


def generate_library(cfg: Config) -> Library:
    sim = Simulator(cfg.model, "normal", None, None, cfg.seed, cfg.noise_std, cfg.control_dt, cfg.footprint)
    mps, clusters = teleop_generate(sim=sim, delta_t=cfg.delta_t, ap=cfg.ap, seed=cfg.seed)
    return Library(mps, clusters)


def _metrics(method: str, profile: str, goal, sim: Simulator, t0: float, odo0: float,
             threshold: float) -> ScenarioResult:
    end = sim.pose
    dist = math.hypot(goal[0] - end.x, goal[1] - end.y)
    return ScenarioResult(method, profile, (float(goal[0]), float(goal[1])), sim.odometer - odo0,
                          (end.x, end.y), sim.clock - t0, dist, int(dist <= threshold))


def run_scenario(profile: str, goal: tuple[float, float], method: str, cfg: Config = Config(),
                 library: Library | None = None) -> ScenarioResult:
    """Run one cell of the matrix in a fresh simulator starting at the origin."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    resolve_profile(profile)
    sim = cfg.make_sim(profile, Pose2D())
    start = Pose2D()
    extra: dict = {}
    if method == "ours":
        if library is None:
            library = generate_library(cfg)
        adaptive = replace(cfg.adaptive, time_budget=cfg.time_cap)
        nav = adaptive_navigate(start, goal, copy.deepcopy(library.clusters), sim, adaptive)
        extra = {"plans": nav.metrics["plans"], "promoted": nav.metrics["promoted"],
                 "failure": nav.failure, "events": nav.events}
    else:
        dwa_cfg = replace(cfg.dwa, time_cap=cfg.time_cap)
        res = baseline_dwa(start, goal, sim, cfg.model, dwa_cfg)
        extra = {"collided": res.collided}
    out = _metrics(method, profile, goal, sim, 0.0, 0.0, cfg.success_threshold)
    out.trace = list(sim.history)
    out.extra = extra
    return out


def run_matrix(cfg: Config = Config(), library: Library | None = None,
               profiles: Sequence[str] = PROFILE_ORDER, goals=GOALS,
               methods: Sequence[str] = METHODS) -> list[ScenarioResult]:
    library = library or generate_library(cfg)
    results = []
    for p in profiles:
        for m in methods:
            for g in goals:
                r = run_scenario(p, g, m, cfg, library)
                log.info("%s %s %s -> %.2f m (%d)", p, m, g, r.distance_to_goal, r.result)
                results.append(r)
    return results


def _fmt_goal(g) -> str:
    return f"({g[0]:g}, {g[1]:g})"


def _fmt_point(p) -> str:
    return f"({p[0]:.2f}, {p[1]:.2f})"


RESULT_COLUMNS = ("profile", "method", "goal", "path_length_m", "end_point", "run_time_s",
                  "distance_to_goal_m", "result")


def results_csv(results: Sequence[ScenarioResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in results:
        w.writerow([r.profile, r.method, _fmt_goal(r.goal), f"{r.path_length:.2f}", _fmt_point(r.end_point),
                    f"{r.run_time:.2f}", f"{r.distance_to_goal:.2f}", r.result])
    return buf.getvalue()


def report(results: Sequence[ScenarioResult]) -> tuple[str, str]:
    """Plain-text table in the classic column order, plus the CSV text."""
    header = ["", "Methods", "Goal", "Path Length(m)", "End Point", "Run Time(s)*", "Distance to Goal(m)", "Result"]
    rows = []
    last = None
    for r in results:
        label = PROFILE_LABELS.get(r.profile, r.profile) if r.profile != last else ""
        last = r.profile
        rows.append([label, "DWA-lite" if r.method == "baseline" else "ours", _fmt_goal(r.goal),
                     f"{r.path_length:.2f}", _fmt_point(r.end_point), f"{r.run_time:.2f}",
                     f"{r.distance_to_goal:.2f}", str(r.result)])
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = "+".join("-" * (w + 2) for w in widths)
    out = ["* Run Time is simulated seconds, not robot wall time.",
           line, " | ".join(h.ljust(w) for h, w in zip(header, widths)), line]
    out += [" | ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    out.append(line)
    out.append("Result: 1 = success (distance to goal within threshold), 0 = failure.")
    return "\n".join(out) + "\n", results_csv(results)


def write_trace_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "theta", "wl_cmd", "wr_cmd", "wl_eff", "wr_eff"])
        for h in history:
            w.writerow([f"{h.t:.4f}", f"{h.pose.x:.6f}", f"{h.pose.y:.6f}", f"{h.pose.theta:.6f}",
                        f"{h.cmd.omega_left:.6f}", f"{h.cmd.omega_right:.6f}",
                        f"{h.effective.omega_left:.6f}", f"{h.effective.omega_right:.6f}"])
