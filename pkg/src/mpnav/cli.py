"""Command-line entry point: ``mpnav {gen,cluster,plan,navigate,bench,report}``."""

from __future__ import annotations

import argparse
import copy
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import bench
from .adaptive import adaptive_navigate
from .clustering import build_clusters
from .geometry import Pose2D
from .planner import PenaltyGrid, PlanningError, plan_astar
from .primitives import generate_mps, load_log_csv, load_library

log = logging.getLogger("mpnav")


def _goal(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"goal must look like X,Y, got {text!r}") from None
    return x, y


def _config(args) -> bench.Config:
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    return bench.load_config(args.config, over)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _library(args, cfg: bench.Config) -> bench.Library:
    if args.library:
        return bench.Library.load(args.library, cfg.ap)
    return bench.generate_library(cfg)


def cmd_gen(args) -> int:
    cfg = _config(args)
    lib = bench.generate_library(cfg)
    if not lib.primitives:
        log.warning("no motion primitives generated")
    path = _out(args) / "library.json"
    lib.save(path, delta_t=cfg.delta_t, seed=cfg.seed)
    print(f"{len(lib.primitives)} primitives, {len(lib.clusters)} clusters -> {path}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _config(args)
    if args.log:
        mps = generate_mps(load_log_csv(args.log), cfg.delta_t)
    else:
        mps, _ = load_library(args.library)
    lib = bench.Library(mps, build_clusters(mps, cfg.ap))
    path = _out(args) / "library.json"
    lib.save(path, delta_t=cfg.delta_t)
    print(f"{len(mps)} primitives, {len(lib.clusters)} clusters -> {path}")
    return 0


def cmd_plan(args) -> int:
    cfg = _config(args)
    lib = _library(args, cfg)
    exemplars = [c.exemplar for c in lib.clusters]
    try:
        plan = plan_astar(exemplars, Pose2D(), args.goal, cfg.make_grid(), PenaltyGrid(), cfg.adaptive.planner)
    except PlanningError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return 2
    path = _out(args) / "plan.csv"
    plan.save_csv(path)
    print(f"{len(plan.actions)} actions, length {plan.length:.2f} m, {plan.expansions} expansions -> {path}")
    return 0


def cmd_navigate(args) -> int:
    cfg = _config(args)
    lib = _library(args, cfg)
    out = _out(args)
    if args.method == "ours":
        sim = cfg.make_sim(args.profile, Pose2D())
        adaptive = replace(cfg.adaptive, time_budget=cfg.time_cap)
        nav = adaptive_navigate(Pose2D(), args.goal, copy.deepcopy(lib.clusters), sim, adaptive)
        nav.save_events_csv(out / "events.csv")
        history = sim.history
        res = bench._metrics("ours", args.profile, args.goal, sim, 0.0, 0.0, cfg.success_threshold)
    else:
        res = bench.run_scenario(args.profile, args.goal, "baseline", cfg, lib)
        history = res.trace
    bench.write_trace_csv(out / "trace.csv", history)
    print(f"{res.method} {args.profile} goal {args.goal}: distance {res.distance_to_goal:.2f} m, "
          f"path {res.path_length:.2f} m, time {res.run_time:.2f} s, result {res.result}")
    return 0 if res.result else 1


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = _out(args)
    t0 = time.perf_counter()
    lib = _library(args, cfg)
    profiles = [args.profile] if args.profile else bench.PROFILE_ORDER
    methods = [args.method] if args.method else bench.METHODS
    goals = [args.goal] if args.goal else bench.GOALS
    results = bench.run_matrix(cfg, lib, profiles, goals, methods)
    table, text = bench.report(results)
    (out / "results.csv").write_text(text)
    (out / "table.txt").write_text(table)
    for r in results:
        name = f"trace_{r.profile}_{r.method}_{r.goal[0]:g}_{r.goal[1]:g}.csv"
        bench.write_trace_csv(out / name, r.trace)
    print(table, end="")
    log.info("bench finished in %.1f s", time.perf_counter() - t0)
    return 0


def cmd_report(args) -> int:
    with open(args.results, newline="") as fh:
        rows = list(csv.DictReader(fh))
    results = []
    for r in rows:
        g = _goal(r["goal"].strip("()").replace(" ", ""))
        e = _goal(r["end_point"].strip("()").replace(" ", ""))
        results.append(bench.ScenarioResult(r["method"], r["profile"], g, float(r["path_length_m"]), e,
                                            float(r["run_time_s"]), float(r["distance_to_goal_m"]),
                                            int(r["result"])))
    table, _ = bench.report(results)
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpnav", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, library=True):
        sp.add_argument("--config", help="JSON file overriding defaults")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out")
        if library:
            sp.add_argument("--library", help="MP library JSON (generated when omitted)")

    sp = sub.add_parser("gen", help="scripted teleop -> MP library")
    common(sp, library=False)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("cluster", help="cluster a log CSV or an existing library")
    common(sp, library=False)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--log")
    src.add_argument("--library")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("plan", help="plan once from the origin with the library exemplars")
    common(sp)
    sp.add_argument("--goal", type=_goal, required=True)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("navigate", help="run one scenario and dump its trace")
    common(sp)
    sp.add_argument("--goal", type=_goal, required=True)
    sp.add_argument("--profile", default="normal", choices=bench.PROFILE_ORDER)
    sp.add_argument("--method", default="ours", choices=bench.METHODS)
    sp.set_defaults(func=cmd_navigate)

    sp = sub.add_parser("bench", help="run the profile x goal x method matrix")
    common(sp)
    sp.add_argument("--goal", type=_goal)
    sp.add_argument("--profile", choices=bench.PROFILE_ORDER)
    sp.add_argument("--method", choices=bench.METHODS)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("report", help="render a results CSV as a table")
    sp.add_argument("results")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
