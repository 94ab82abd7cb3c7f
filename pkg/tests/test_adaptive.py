import copy
import csv
import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import constant_mp
from mpnav.adaptive import (AdaptiveConfig, ExecutionReport, StepRecord, VoteLedger, adaptive_navigate, ccdmp,
                            cccmp, execute_plan, vote_update)
from mpnav.bench import Config
from mpnav.clustering import ACTIVE, CANDIDATE, MPCluster
from mpnav.geometry import Pose2D, WheelCommand, pose_relative, wrap_angle
from mpnav.planner import Plan
from mpnav.primitives import MotionPrimitive, featurize
from mpnav.sim import OccupancyGrid, Simulator


def straight(length: float, mp_id: int = 0) -> MotionPrimitive:
    return MotionPrimitive([(0.0, WheelCommand(5, 5))], [(0.0, Pose2D()), (1.0, Pose2D(length, 0, 0))], mp_id)


def cluster(mp: MotionPrimitive, votes: int = 0, status: str = ACTIVE) -> MPCluster:
    return MPCluster(mp.id, {mp.id}, votes, status, mp)


def test_ccdmp_examples():
    mp = straight(1.0)
    start = Pose2D(2.0, 1.0, math.pi / 2)
    same = [start, Pose2D(2.0, 2.0, math.pi / 2)]
    assert ccdmp(mp, same)
    off = [start, Pose2D(2.5, 2.0, math.pi / 2)]
    assert not ccdmp(mp, off, tol_pos=0.15)
    assert ccdmp(straight(1.0), [Pose2D(), Pose2D(1.15, 0, 0)], tol_pos=0.15)
    assert ccdmp(straight(1.0), [Pose2D(), Pose2D(1.0, 0, 0.2)], tol_theta=0.2)
    assert not ccdmp(straight(1.0), [Pose2D(), Pose2D(1.0, 0, 0.21)], tol_theta=0.2)


def test_cccmp_examples():
    a = constant_mp(WheelCommand(6, 6), mp_id=3)
    assert cccmp(a, []) is None
    assert cccmp(a, [cluster(a, status=CANDIDATE)]) == 3
    near = constant_mp(WheelCommand(6, 7), mp_id=5)
    far = constant_mp(WheelCommand(-6, 6), mp_id=1)
    d_near = float(((featurize(a) - featurize(near)) ** 2).sum() ** 0.5)
    d_far = float(((featurize(a) - featurize(far)) ** 2).sum() ** 0.5)
    assert d_near < 0.5 < d_far
    assert cccmp(a, [cluster(far, status=CANDIDATE), cluster(near, status=CANDIDATE)], tol=0.5) == 5
    assert cccmp(a, [cluster(far, status=CANDIDATE)], tol=0.5) is None


def test_cccmp_ties_lowest_id():
    a = constant_mp(WheelCommand(6, 6), mp_id=0)
    twins = [cluster(a.with_id(9), status=CANDIDATE), cluster(a.with_id(4), status=CANDIDATE)]
    assert cccmp(a, twins) == 4


def _ledger():
    act = [cluster(straight(1.0, 0)), cluster(straight(0.5, 1))]
    cand = cluster(constant_mp(WheelCommand(-6, 6), mp_id=7), votes=1, status=CANDIDATE)
    return VoteLedger(act + [cand])


def test_consistent_record_upvotes():
    led = _ledger()
    led.apply(StepRecord(0, Pose2D(), Pose2D(), True))
    assert led.by_id(0).votes == 1
    assert led.log == [("upvote", 0)]


def test_inconsistent_unknown_motion_adds_candidate():
    led = _ledger()
    observed = constant_mp(WheelCommand(8, 2), mp_id=0)
    led.apply(StepRecord(0, Pose2D(), Pose2D(), False, observed))
    assert led.by_id(0).votes == -1
    [new] = [c for c in led.candidates() if c.exemplar_id != 7]
    assert new.votes == 1 and new.exemplar_id == 8 and new.exemplar.poses == observed.poses


def test_inconsistent_known_motion_upvotes_candidate():
    led = _ledger()
    observed = constant_mp(WheelCommand(-6, 6), mp_id=1)
    led.apply(StepRecord(1, Pose2D(), Pose2D(), False, observed))
    assert led.by_id(1).votes == -1
    assert led.by_id(7).votes == 2
    assert len(led.clusters) == 3


def test_candidate_promoted_at_threshold():
    led = _ledger()
    observed = constant_mp(WheelCommand(-6, 6), mp_id=1)
    for k in range(2):
        assert led.by_id(7).status == CANDIDATE
        led.apply(StepRecord(0, Pose2D(), Pose2D(), False, observed))
    assert led.by_id(7).status == ACTIVE and led.by_id(7).votes == 3
    assert ("promote", 7) in led.log
    assert 7 in [c.exemplar_id for c in led.enabled()]


def test_disable_floor_and_reenable():
    led = VoteLedger([cluster(straight(1.0, 0)), cluster(straight(0.5, 1))])
    bad = StepRecord(0, Pose2D(), Pose2D(), False)
    for _ in range(2):
        led.apply(bad)
    assert not led.by_id(0).enabled and [c.exemplar_id for c in led.enabled()] == [1]
    for _ in range(3):
        led.apply(StepRecord(1, Pose2D(), Pose2D(), False))
    # the floor rule keeps the last cluster plannable
    assert led.by_id(1).votes == -3 and led.by_id(1).enabled
    led.apply(StepRecord(0, Pose2D(), Pose2D(), True))
    assert led.by_id(0).enabled and ("enable", 0) in led.log


def test_enabled_order_and_cap():
    led = VoteLedger([cluster(straight(1.0, i), votes=v) for i, v in enumerate([0, 2, 2, -1])])
    assert [c.exemplar_id for c in led.enabled()] == [1, 2, 0, 3]
    assert [c.exemplar_id for c in led.enabled(2)] == [1, 2]


def test_vote_ledger_conservation_exhaustive():
    observed = {"match": constant_mp(WheelCommand(-6, 6), mp_id=0),
                "new": constant_mp(WheelCommand(8, 2), mp_id=0)}
    for start_votes, consistent, kind in itertools.product((-1, 0, 2), (True, False), ("match", "new")):
        led = _ledger()
        led.by_id(0).votes = start_votes
        before = {c.exemplar_id: c.votes for c in led.clusters}
        led.apply(StepRecord(0, Pose2D(), Pose2D(), consistent, observed[kind]))
        after = {c.exemplar_id: c.votes for c in led.clusters}
        deltas = {k: after[k] - before.get(k, 0) for k in after if after[k] != before.get(k, 0)}
        if consistent:
            assert deltas == {0: 1}
        elif kind == "match":
            assert deltas == {0: -1, 7: 1}
        else:
            assert deltas == {0: -1, 8: 1}
        assert all(abs(d) == 1 for d in deltas.values())


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.booleans()), max_size=40))
def test_floor_rule_never_empties_planning_set(records):
    led = VoteLedger([cluster(straight(1.0 + i, i)) for i in range(3)])
    for mp_id, ok in records:
        led.apply(StepRecord(mp_id, Pose2D(), Pose2D(), ok))
        assert led.enabled()
    member_sets = [c.member_ids for c in led.clusters]
    assert sum(map(len, member_sets)) == len(set().union(*member_sets))


def test_vote_update_applies_each_record():
    led = _ledger()
    rep = ExecutionReport([StepRecord(0, Pose2D(), Pose2D(), True), StepRecord(1, Pose2D(), Pose2D(), True)])
    vote_update(led, rep)
    assert (led.by_id(0).votes, led.by_id(1).votes) == (1, 1)


def _run_plan(mp: MotionPrimitive, profile: str, n: int = 3, config=AdaptiveConfig()):
    states = [Pose2D()] * (n + 1)
    sim = Simulator(profile=profile)
    return execute_plan(Plan(states, [mp.id] * n, 0.0), {mp.id: mp}, sim, config)


def test_execute_plan_normal_all_consistent():
    mp = constant_mp(WheelCommand(10, 12), mp_id=2)
    rep = _run_plan(mp, "normal")
    assert rep.executed_mps == 3 and all(r.consistent for r in rep.records)
    assert not rep.collided
    ts = [t for t, _ in rep.trace]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_execute_plan_overload_falls_short():
    mp = constant_mp(WheelCommand(12, 12), mp_id=2)
    rep = _run_plan(mp, "overload", config=AdaptiveConfig(replan_on_inconsistency=False))
    assert rep.executed_mps == 3
    for r in rep.records:
        assert not r.consistent
        assert r.executed_end.x < r.designed_end.x - 0.3
    # the observed primitive keeps the original commands
    assert rep.records[0].executed_mp.controls == mp.controls
    assert rep.records[0].executed_mp.end_pose.x == pytest.approx(5 * 0.098, abs=1e-9)


def test_execute_plan_left_cap_drifts_left():
    mp = constant_mp(WheelCommand(10, 10), mp_id=2)
    rep = _run_plan(mp, "left_constrained")
    assert rep.executed_mps == 1  # re-plan after the first inconsistent primitive
    r = rep.records[0]
    assert wrap_angle(r.executed_end.theta - r.designed_end.theta) > 0
    assert pose_relative(r.designed_end, r.executed_end).y > 0


def test_execute_empty_plan_rejected():
    with pytest.raises(ValueError):
        execute_plan(Plan([Pose2D()], [], 0.0), {}, Simulator())


def test_execute_plan_stops_on_collision():
    grid = OccupancyGrid.empty(4.0, 4.0, 0.05, (-2.0, -2.0))
    grid.set_box(1.5, -2.0, 1.7, 2.0)  # hit during the second primitive
    mp = constant_mp(WheelCommand(10, 10), mp_id=2)
    rep = execute_plan(Plan([Pose2D()] * 4, [2, 2, 2], 0.0), {2: mp}, Simulator(grid=grid))
    assert rep.collided and rep.executed_mps == 1


def _navigate(library, profile, goal):
    sim = Config().make_sim(profile)
    return adaptive_navigate(Pose2D(), goal, copy.deepcopy(library.clusters), sim), sim


def test_normal_profile_reached_on_first_plan(library):
    res, _ = _navigate(library, "normal", (3, 2))
    assert res.reached and res.metrics["plans"] == 1 and res.failure is None
    assert res.metrics["distance_to_goal"] <= 0.5


def test_overload_reaches_goal(library):
    res, _ = _navigate(library, "overload", (3, 2))
    assert res.reached and res.metrics["distance_to_goal"] <= 1.0


def test_left_constrained_reaches_goal(library):
    res, _ = _navigate(library, "left_constrained", (3, -2))
    assert res.reached and res.metrics["distance_to_goal"] <= 1.0


def test_start_at_goal_needs_no_plan(library):
    res, _ = _navigate(library, "overload", (0, 0))
    assert res.reached and res.metrics["plans"] == 0 and res.metrics["path_length"] == 0.0


def test_retry_limit(library):
    sim = Simulator(profile="overload")
    cfg = AdaptiveConfig(max_plans=1)
    res = adaptive_navigate(Pose2D(), (3, 2), copy.deepcopy(library.clusters), sim, cfg)
    assert not res.reached and res.failure == "retry limit" and res.metrics["plans"] == 1


def test_events_csv(library, tmp_path):
    res, _ = _navigate(library, "right_constrained", (3, 2))
    path = tmp_path / "events.csv"
    res.save_events_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["iteration", "plan_length", "executed", "consistent", "collided", "ledger"]
    assert [int(r["iteration"]) for r in rows] == list(range(1, len(rows) + 1))
    assert len(rows) == res.metrics["plans"]
