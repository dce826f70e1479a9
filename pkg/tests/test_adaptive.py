import json
import math

import pytest

from rccsim.adaptive import ControlPolicy, FleetController, StockFlowState, fleet_schedule, required_fleet
from rccsim.config import parse_config
from rccsim.geometry import RoadSpec, SpeedSpec
from rccsim.process import LARGE, SMALL, ActivityRecord, PaverSpec, SupplyModel
from rccsim.scenarios import run_adaptive, run_fixed


@pytest.mark.parametrize("cycle,interval,trucks", [(30, 7.5, 4), (128.25, 7.5, 18), (8.25, 7.5, 2), (7.5, 7.5, 1)])
def test_required_fleet(cycle, interval, trucks):
    assert required_fleet(cycle, interval) == trucks


def test_required_fleet_needs_positive_interval():
    with pytest.raises(ValueError):
        required_fleet(10, 0)


@pytest.mark.parametrize("kw", [dict(review_interval=0), dict(hysteresis_band=-1), dict(mobilization_delay=-1),
                                dict(min_active={"large": 3}, max_active={"large": 2})])
def test_policy_validation(kw):
    with pytest.raises(ValueError):
        ControlPolicy(**kw)


def test_stock_effective():
    assert StockFlowState(0.0, "large", active=9, marked=3, released=0, mobilizing=1).effective == 7


def fixed_cycle_model(n, travel, policy, total=2000.0):
    road = RoadSpec(total / 2.2, 11, 0.2, 0)
    ctl = FleetController(policy)
    m = SupplyModel(road, SpeedSpec(40, 80), {"large": LARGE, "small": SMALL}, {"large": n},
                    PaverSpec(1.0, 7.5), controller=ctl, travel_override={"large": travel, "small": (1, 1)},
                    audit=True)
    return m, ctl


def first_review(ctl):
    return next(d for d in ctl.diagnostics if d["event"] == "review")


LOOP1_ONLY = dict(hysteresis_band=0, starvation_recall=False, idle_release=False)


def test_review_holds_at_target():
    # cycle 4.5 + 30 + 3.75 + 28.75 = 67 -> ceil(67 / 7.5) = 9
    m, ctl = fixed_cycle_model(9, (30.0, 28.75), ControlPolicy(**LOOP1_ONLY))
    run = m.run()
    d = first_review(ctl)
    assert (d["required"], d["effective"], d["action"], d["count"]) == (9, 9, "hold", 0)
    assert not any(r.to_state == "idle-released" for r in run.activity)


def test_review_releases_surplus():
    # cycle 44 -> 6 trucks needed out of 9
    m, ctl = fixed_cycle_model(9, (20.0, 15.75), ControlPolicy(**LOOP1_ONLY))
    run = m.run()
    d = first_review(ctl)
    assert (d["required"], d["effective"], d["action"], d["count"]) == (6, 9, "release", 3)
    released = {r.truck_id for r in run.activity if r.to_state == "idle-released"}
    assert len(released) == 3
    # a released truck never carries concrete away
    for r in run.activity:
        if r.to_state == "idle-released":
            assert r.from_state in ("at-plant-queue", "returning") and r.load == 0.0


def test_review_reactivates_released_trucks():
    m, ctl = fixed_cycle_model(8, (26.0, 25.0), ControlPolicy(**LOOP1_ONLY))  # cycle 59.25 -> 8
    ctl.attach(m)
    for t in list(m.trucks[-2:]):
        m.plant_queue["large"].append(t)
        m.release_from_queue(t)
    assert ctl.stock("large").effective == 6
    ctl.review()
    d = first_review(ctl)
    assert (d["target"], d["effective"], d["action"], d["count"]) == (8, 6, "activate", 2)
    assert not m.released_pool["large"]
    assert [r.to_state for r in m.activity[-2:]] == ["at-plant-queue", "at-plant-queue"]


def test_hysteresis_suppresses_small_moves():
    m2, ctl2 = fixed_cycle_model(9, (26.0, 25.0), ControlPolicy(hysteresis_band=1, starvation_recall=False,
                                                                idle_release=False))  # 8: inside the band
    m2.run()
    assert all(d["action"] == "hold" for d in ctl2.diagnostics if d["event"] == "review")


def test_max_active_clamps_target():
    m, ctl = fixed_cycle_model(9, (20.0, 15.75), ControlPolicy(max_active={"large": 4}, **LOOP1_ONLY))
    m.run()
    d = first_review(ctl)
    assert d["target"] == 4 and d["count"] == 5


def test_controller_attaches_once():
    m, ctl = fixed_cycle_model(2, (1.0, 1.0), ControlPolicy())
    ctl.attach(m)
    with pytest.raises(RuntimeError):
        ctl.attach(m)


def test_mobilization_delay_recalls_later(cfg):
    variant = json.loads(cfg.model_dump_json())
    variant["road"].update(length=6000.0, plant_chainage=3000.0)
    variant["control"]["mobilization_delay"] = 30.0
    c = parse_config(variant)
    run, ctl = run_adaptive(c, {"large": 6})
    assert run.makespan is not None
    back = [r for r in run.activity if r.from_state == "idle-released"]
    assert all(r.to_state == "at-plant-queue" for r in back)


def test_infinite_band_matches_fixed_run(cfg):
    variant = json.loads(cfg.model_dump_json())
    variant["road"].update(length=8000.0, plant_chainage=5000.0)
    c = parse_config(variant)
    fleet = {"large": 5, "small": 2}
    policy = ControlPolicy(hysteresis_band=math.inf)
    run, ctl = run_adaptive(c, fleet, policy)
    base = run_fixed(c, fleet, engine="reference")
    assert run.activity == base.activity
    assert run.violations == base.violations and run.makespan == base.makespan
    assert all(d["action"] == "hold" for d in ctl.diagnostics if d["event"] == "review")


def test_short_haul_collapses_to_small_fleet(cfg):
    variant = json.loads(cfg.model_dump_json())
    variant["road"].update(length=2000.0, plant_chainage=0.0)
    run, _ = run_adaptive(parse_config(variant), {"large": 9, "small": 1})
    sched = fleet_schedule(run.activity, run.truck_classes, run.makespan)
    after = {c["large"] for t, c in ((t, dict(zip(sched.classes, v))) for t, v in sched.steps) if t > 0}
    assert len(after) == 1 and after.pop() <= 3
    assert run.violations == []


# -- schedules ------------------------------------------------------------------


def test_schedule_without_adjustments_is_constant():
    log = [ActivityRecord(0.0, "L1", "at-plant-queue", "loading", 7.5)]
    sched = fleet_schedule(log, {"L1": "large", "L2": "large", "S1": "small"}, 120.0)
    assert sched.steps == ((0.0, (2, 1)),)
    assert sched.class_hours() == {"large": 4.0, "small": 2.0}
    assert sched.truck_hours() == 6.0


def test_schedule_steps_at_release_times():
    classes = {f"L{i}": "large" for i in range(1, 10)}
    log = [ActivityRecord(30.0, f"L{i}", "returning", "idle-released", 0.0) for i in (7, 8, 9)]
    sched = fleet_schedule(log, classes, 60.0)
    assert sched.steps == ((0.0, (9,)), (30.0, (6,)))
    assert sched.counts_at(29.9) == {"large": 9} and sched.counts_at(30.0) == {"large": 6}
    assert sched.truck_hours() == pytest.approx((9 * 30 + 6 * 30) / 60)


def test_case_study_schedule_is_v_shaped(cfg, adaptive_pair):
    run, ctl, _ = adaptive_pair
    sched = fleet_schedule(run.activity, run.truck_classes, run.makespan)
    counts = [c[sched.classes.index("large")] for _, c in sched.steps]
    times = [t for t, _ in sched.steps]
    low = min(counts)
    i_low = counts.index(low)
    # the plant sits 25 km in; the front reaches it after ~25000 * 2.2 m³ placed
    crossing = 25000 * cfg.road.width * cfg.road.thickness / cfg.paver.placement_rate
    assert counts[0] > low and counts[-1] > low
    assert abs(times[i_low] - crossing) < 0.1 * run.makespan
    assert all(1 <= c <= run.fleet["large"] for c in counts)
    # the lengthening haul pulls released trucks back (recalls at the plant gate)
    back = [r for r in run.activity if r.from_state == "idle-released" and r.time > times[i_low]]
    assert len(back) >= counts[-1] - low
