import math

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracle import oracle_activity
from rccsim.geometry import RoadSpec, SpeedSpec
from rccsim.kernel import ConservationError
from rccsim.process import (
    LARGE,
    SMALL,
    ActivityRecord,
    ConstraintSpec,
    DispatchSpec,
    PaverSpec,
    SupplyModel,
    Truck,
    TruckClass,
    Violation,
    check_freshness,
    check_interarrival,
    utilization,
)

CLASSES = {"large": LARGE, "small": SMALL}
NEXT_STATE = {
    "at-plant-queue": {"loading", "idle-released"},
    "loading": {"hauling"},
    "hauling": {"at-paver-queue"},
    "at-paver-queue": {"dumping"},
    "dumping": {"returning"},
    "returning": {"at-plant-queue", "idle-released"},
    "idle-released": {"at-plant-queue"},
}


def fixed_model(fleet, total, rate=1.0, travel=None, hopper=7.5, margin=1.5, constraints=ConstraintSpec(),
                **kw):
    """A model whose road holds exactly ``total`` m³ and whose travel times are fixed."""
    classes = {n: CLASSES[n] for n in fleet}
    if travel is None:
        travel = {n: (0.0, 0.0) for n in classes}
    road = RoadSpec(total / (11 * 0.2), 11, 0.2, 0)
    return SupplyModel(road, SpeedSpec(40, 80), classes, fleet, PaverSpec(rate, hopper), constraints,
                       DispatchSpec(margin), travel_override=travel, audit=True, **kw)


def transitions(run):
    return [(t, tid, a, b) for t, tid, a, b, _ in run.activity]


# -- truck classes and cycles -------------------------------------------------


def test_case_study_classes():
    assert (LARGE.capacity, LARGE.load_duration, LARGE.dump_duration) == (7.5, 4.5, 3.75)
    assert (SMALL.capacity, SMALL.load_duration, SMALL.dump_duration) == (5.0, 3.0, 2.5)
    assert LARGE.capacity == 1.5 * SMALL.capacity
    assert LARGE.dump_rate == 2.0 and SMALL.dump_rate == 2.0


def test_truck_class_validation():
    with pytest.raises(ValueError):
        TruckClass("x", 0, 1, 1)
    with pytest.raises(ValueError):
        TruckClass("x", 1, 1, -1)


def test_cycle_at_plant():
    m = SupplyModel(RoadSpec(1000, 11, 0.2, 0), SpeedSpec(40, 80), CLASSES, {"large": 1, "small": 1})
    assert m.cycle_minutes(LARGE) == 8.25
    assert m.cycle_minutes(SMALL) == 5.5


def test_cycle_at_25km():
    m = SupplyModel(RoadSpec(44000, 11, 0.2, 25000), SpeedSpec(25, 25), CLASSES, {"large": 1})
    assert m.cycle_minutes(LARGE) == pytest.approx(128.25)


def test_capacity_above_hopper_rejected():
    with pytest.raises(ValueError, match="hopper"):
        SupplyModel(RoadSpec(100, 11, 0.2, 0), SpeedSpec(40, 80), CLASSES, {"large": 1}, PaverSpec(1.0, 5.0))


# -- hand-traced runs -----------------------------------------------------------


def test_one_truck_hand_trace():
    # 15 m³ is two large loads; 10 min out, 5 back, paver 1 m³/min
    run = fixed_model({"large": 1}, 15.0, travel={"large": (10.0, 5.0)}).run()
    assert transitions(run) == [
        (0.0, "L1", "at-plant-queue", "at-plant-queue"),
        (0.0, "L1", "at-plant-queue", "loading"),
        (4.5, "L1", "loading", "hauling"),
        (14.5, "L1", "hauling", "at-paver-queue"),
        (14.5, "L1", "at-paver-queue", "dumping"),
        (18.25, "L1", "dumping", "returning"),
        (23.25, "L1", "returning", "at-plant-queue"),
        (23.25, "L1", "at-plant-queue", "loading"),
        (27.75, "L1", "loading", "hauling"),
        (37.75, "L1", "hauling", "at-paver-queue"),
        (37.75, "L1", "at-paver-queue", "dumping"),
        (41.5, "L1", "dumping", "returning"),
    ]
    # the hopper holds 3.75 at the last dump end and drains at 1 m³/min
    assert run.makespan == 45.25
    # stalled from 22.0 (hopper empty) until the second dump at 37.75
    assert run.stall_time == pytest.approx(15.75)
    assert run.discarded == 0.0
    assert [v.kind for v in run.violations] == ["interarrival"]
    assert run.violations[0].magnitude == pytest.approx(37.75 - 18.25 - 3.0)


def test_one_truck_no_waiting_is_fully_busy():
    for cls, total in (("large", 15.0), ("small", 10.0)):
        run = fixed_model({cls: 1}, total, rate=math.inf).run()
        _, per_class = run.utilization()
        assert per_class[cls] == 1.0


def test_two_trucks_share_the_loading_bay():
    # loads 0-4.5, 4.5-9, 9-13.5, 13.5-18; each truck waits 0.75 per cycle
    # and L2 waits 4.5 at the start, L1 4.5 at the end
    run = fixed_model({"large": 2}, 30.0, rate=math.inf).run()
    assert run.makespan == 21.75
    per_truck, per_class = run.utilization()
    assert per_truck == {"L1": 16.5 / 21.75, "L2": 16.5 / 21.75}
    assert per_class["large"] < 1.0


def test_supply_above_placement_rate_never_stalls():
    run = fixed_model({"large": 2}, 150.0).run()
    assert run.stall_time == 0.0
    assert run.violations == []


def test_dump_waits_for_hopper_space():
    run = fixed_model({"large": 2}, 60.0, margin=30.0).run()
    rows = [r for r in transitions(run) if r[1] == "L2"]
    assert (9.0, "L2", "hauling", "at-paver-queue") in rows
    # 3.0 m³ left in the hopper at 9.0, draining at 1: room for 7.5 at 12.0
    assert (12.0, "L2", "at-paver-queue", "dumping") in rows


def test_job_ending_mid_dump_discards_the_rest():
    run = fixed_model({"large": 1}, 10.0).run()
    assert run.batched == 15.0
    assert run.discarded == pytest.approx(5.0)
    assert run.batched == pytest.approx(run.placed + run.discarded)


def test_last_dump_ending_exactly_at_completion():
    # infinite rate: placement equals the dump inflow, so the job total is
    # reached at the same instant the final dump ends
    run = fixed_model({"large": 1}, 7.5, rate=math.inf).run()
    assert run.makespan == 8.25
    assert run.discarded == 0.0


def test_model_runs_once():
    m = fixed_model({"large": 1}, 7.5)
    m.run()
    with pytest.raises(RuntimeError):
        m.run()


def test_audit_catches_broken_ledger():
    m = fixed_model({"large": 1}, 15.0, travel={"large": (1.0, 1.0)})
    m.batched = 1.0  # corrupt the ledger before the first event
    with pytest.raises(ConservationError):
        m.run()


# -- monitors -------------------------------------------------------------------


def _truck(batch_time):
    t = Truck("L1", LARGE)
    t.batch_complete_time = batch_time
    return t


@pytest.mark.parametrize("dump_end,lag,magnitude", [(40.0, 0.0, None), (50.0, 0.0, 5.0), (44.0, 5.0, 4.0)])
def test_check_freshness(dump_end, lag, magnitude):
    v = check_freshness(_truck(0.0), dump_end, ConstraintSpec(compaction_lag=lag))
    if magnitude is None:
        assert v is None
    else:
        assert v == Violation("freshness", dump_end, magnitude, "L1")


def test_check_freshness_needs_a_batch():
    with pytest.raises(ValueError):
        check_freshness(_truck(None), 10.0, ConstraintSpec())


@pytest.mark.parametrize("arrivals,magnitudes", [([10, 12.5, 15], []), ([10, 14], [1.0]), ([10], [])])
def test_check_interarrival(arrivals, magnitudes):
    out = check_interarrival(arrivals, ConstraintSpec())
    assert [v.magnitude for v in out] == magnitudes
    assert all(v.kind == "interarrival" for v in out)


def test_interarrival_from_departures():
    # the second truck arrives 4.5 after the first but while it is still dumping
    arrivals = [10.0, 14.5, 25.0]
    departures = [13.75, 18.25, 29.0]
    out = check_interarrival(arrivals, ConstraintSpec(), departures=departures, truck_ids=["a", "b", "c"])
    assert [(v.truck_id, v.magnitude) for v in out] == [("c", pytest.approx(25.0 - 18.25 - 3.0))]


def test_violation_magnitude_positive():
    with pytest.raises(ValueError):
        Violation("freshness", 1.0, 0.0, "L1")


# -- utilization ----------------------------------------------------------------


def test_released_truck_counts_active_time_only():
    log = [
        ActivityRecord(0.0, "L1", "at-plant-queue", "loading", 7.5),
        ActivityRecord(50.0, "L1", "loading", "idle-released", 0.0),
    ]
    per_truck, per_class = utilization(log, 100.0, {"L1": "large"})
    assert per_truck["L1"] == 1.0 and per_class["large"] == 1.0


def test_utilization_needs_a_horizon():
    with pytest.raises(ValueError):
        utilization([], 0.0, {"L1": "large"})


# -- properties over random small instances ---------------------------------------

durations = st.floats(0.05, 20.0, allow_nan=False, allow_infinity=False)


@st.composite
def instances(draw):
    n_large = draw(st.integers(0, 3))
    n_small = draw(st.integers(0 if n_large else 1, 3 - n_large))
    travel = {n: (draw(durations), draw(durations)) for n in ("large", "small")}
    total = draw(st.floats(3.0, 120.0))
    rate = draw(st.sampled_from([0.5, 0.8, 1.0, 1.3, 2.0]))
    hopper = draw(st.sampled_from([7.5, 10.0, 15.0]))
    margin = draw(st.sampled_from([0.0, 0.7, 1.5, 3.0]))
    fleet = {n: c for n, c in (("large", n_large), ("small", n_small)) if c}
    return fleet, travel, total, rate, hopper, margin


@settings(max_examples=150, suppress_health_check=[HealthCheck.too_slow])
@given(instances())
def test_random_instances(inst):
    fleet, travel, total, rate, hopper, margin = inst
    m = fixed_model(fleet, total, rate, {n: travel[n] for n in fleet}, hopper, margin)
    run = m.run()  # audited: the mass ledger is checked after every event

    assert run.placed == m.total_volume
    assert run.batched >= m.total_volume - 1e-9
    assert run.batched == pytest.approx(run.placed + run.discarded, abs=1e-9)
    assert run.makespan >= m.total_volume / rate - 1e-9

    times = [r[0] for r in run.activity]
    assert times == sorted(times)
    state = {}
    for _, tid, a, b, _ in run.activity:
        if tid in state:
            assert state[tid] == a and b in NEXT_STATE[a]
        state[tid] = b
    per_truck, per_class = run.utilization()
    assert all(0.0 <= u <= 1.0 for u in per_truck.values())

    trucks = [(t.id, t.klass.name, t.klass.capacity, t.klass.load_duration, t.klass.dump_duration)
              for t in m.trucks]
    expected = oracle_activity(trucks, travel, m.total_volume, rate, hopper, margin, m.priority)
    got = transitions(run)
    assert len(got) == len(expected)
    for g, e in zip(got, expected):
        assert g[1:] == e[1:]
        assert abs(g[0] - e[0]) <= 1e-9
