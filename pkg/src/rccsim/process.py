"""Concrete supply chain: batching plant, haul trucks, paver hopper, constraint monitors.

One :class:`SupplyModel` instance owns one kernel and runs one project to
completion.  Trucks cycle plant -> paver -> plant; the paver is a continuous
consumer fed through a finite hopper.  The plant releases loads through a
just-in-time gate so trucks reach the paver shortly before hopper space opens
up, rather than queueing there with ageing concrete.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

from .geometry import RoadSpec, SpeedSpec, front_position, haul_distance, travel_time
from .kernel import (
    ConservationError,
    ContinuousLevel,
    Event,
    Kernel,
    StarvedModelError,
)

if TYPE_CHECKING:
    from .adaptive import FleetController

MASS_TOLERANCE = 1e-9
SPACE_TOLERANCE = 1e-9

# equal-time ordering; deposits settle before stall detection, reviews go last
P_DUMP_END = 0
P_COMPLETE = 1
P_STALL = 2
P_SPACE = 3
P_LOAD_END = 4
P_ARRIVE_PAVER = 5
P_ARRIVE_PLANT = 6
P_GATE = 7
P_MOBILIZED = 8
P_REVIEW = 9


class TruckState(str, Enum):
    AT_PLANT_QUEUE = "at-plant-queue"
    LOADING = "loading"
    HAULING = "hauling"
    AT_PAVER_QUEUE = "at-paver-queue"
    DUMPING = "dumping"
    RETURNING = "returning"
    IDLE_RELEASED = "idle-released"


BUSY_STATES = frozenset({"loading", "hauling", "dumping", "returning"})


@dataclass(frozen=True)
class TruckClass:
    name: str
    capacity: float
    load_duration: float
    dump_duration: float

    def __post_init__(self) -> None:
        if not (self.capacity > 0 and self.load_duration > 0 and self.dump_duration > 0):
            raise ValueError(f"truck class {self.name!r}: capacity and durations must be > 0")

    @property
    def dump_rate(self) -> float:
        return self.capacity / self.dump_duration


LARGE = TruckClass("large", 7.5, 4.5, 3.75)
SMALL = TruckClass("small", 5.0, 3.0, 2.5)


@dataclass(frozen=True)
class PaverSpec:
    placement_rate: float = 1.0
    hopper_capacity: float = 7.5

    def __post_init__(self) -> None:
        if not (self.placement_rate > 0 and self.hopper_capacity > 0):
            raise ValueError("paver placement_rate and hopper_capacity must be > 0")


@dataclass(frozen=True)
class ConstraintSpec:
    freshness_limit: float = 45.0
    interarrival_limit: float = 3.0
    compaction_lag: float = 0.0

    def __post_init__(self) -> None:
        if min(self.freshness_limit, self.interarrival_limit, self.compaction_lag) < 0:
            raise ValueError("constraint limits must be >= 0")


@dataclass(frozen=True)
class DispatchSpec:
    """Plant release rule.

    ``arrival_margin`` is how many minutes ahead of the projected hopper
    opening a truck is timed to arrive.  ``priority`` lists classes in the
    order the plant prefers to load them; ``None`` means largest capacity first.
    """

    arrival_margin: float = 1.5
    priority: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.arrival_margin < 0:
            raise ValueError("dispatch.arrival_margin must be >= 0")


@dataclass(frozen=True)
class Violation:
    kind: str  # "freshness" | "interarrival"
    time: float
    magnitude: float
    truck_id: str

    def __post_init__(self) -> None:
        if not self.magnitude > 0:
            raise ValueError("violation magnitude must be > 0")


class Truck:
    __slots__ = (
        "id", "klass", "state", "batch_complete_time", "load", "dump_start",
        "arrival_time", "marked", "queued_since",
    )

    def __init__(self, truck_id: str, klass: TruckClass) -> None:
        self.id = truck_id
        self.klass = klass
        self.state = TruckState.AT_PLANT_QUEUE
        self.batch_complete_time: Optional[float] = None
        self.load = 0.0
        self.dump_start: Optional[float] = None
        self.arrival_time: Optional[float] = None
        self.marked = False
        self.queued_since = 0.0

    def on_board(self, t: float) -> float:
        """Concrete still on the truck at time ``t``."""
        if self.state is TruckState.DUMPING and self.dump_start is not None:
            return self.load - self.klass.dump_rate * (t - self.dump_start)
        return self.load

    def __repr__(self) -> str:
        return f"Truck({self.id}, {self.state.value}, load={self.load:g})"


@dataclass
class PaverState:
    hopper: ContinuousLevel
    hopper_capacity: float
    placement_rate: float
    placed: ContinuousLevel
    stalled: bool = True
    inflow: float = 0.0

    @property
    def volume_placed(self) -> float:
        return self.placed.level


# -- constraint monitors ----------------------------------------------------


def check_freshness(truck: Truck, dump_end: float, spec: ConstraintSpec) -> Optional[Violation]:
    """Load age at compaction versus the freshness limit (clock starts at load completion)."""
    if truck.batch_complete_time is None:
        raise ValueError(f"truck {truck.id} has no batch on record")
    age = dump_end + spec.compaction_lag - truck.batch_complete_time
    excess = age - spec.freshness_limit
    if excess > 0:
        return Violation("freshness", dump_end, excess, truck.id)
    return None


def check_interarrival(arrivals: Sequence[float], spec: ConstraintSpec, *,
                       departures: Optional[Sequence[float]] = None,
                       truck_ids: Optional[Sequence[str]] = None) -> list[Violation]:
    """Gaps in paver supply longer than the limit.

    Without ``departures`` the gap is measured between consecutive arrivals.
    With ``departures`` (``departures[k]`` is when arrival ``k`` left the
    paver) the gap before arrival ``k`` runs from the previous truck's
    departure, so a truck still on site covers the paver.  A missing
    departure means that truck never left.
    """
    out: list[Violation] = []
    limit = spec.interarrival_limit
    for k in range(1, len(arrivals)):
        if departures is None:
            ref = arrivals[k - 1]
        elif k - 1 < len(departures):
            ref = departures[k - 1]
        else:
            continue
        gap = arrivals[k] - ref
        if gap > limit:
            tid = truck_ids[k] if truck_ids is not None else ""
            out.append(Violation("interarrival", arrivals[k], gap - limit, tid))
    return out


# -- run output -------------------------------------------------------------


class ActivityRecord(tuple):
    """``(time, truck_id, from_state, to_state, load)``."""

    __slots__ = ()

    def __new__(cls, time: float, truck_id: str, from_state: str, to_state: str, load: float):
        return tuple.__new__(cls, (time, truck_id, from_state, to_state, load))

    time = property(lambda self: self[0])
    truck_id = property(lambda self: self[1])
    from_state = property(lambda self: self[2])
    to_state = property(lambda self: self[3])
    load = property(lambda self: self[4])


@dataclass
class RunResult:
    makespan: float
    fleet: dict[str, int]
    truck_classes: dict[str, str]  # truck id -> class name
    activity: list[ActivityRecord]
    arrivals: list[float]
    arrival_trucks: list[str]
    departures: list[float]
    violations: list[Violation]
    batched: float
    placed: float
    discarded: float
    stall_time: float
    loads: dict[str, int]
    trace: list = field(default_factory=list)
    reviews: list = field(default_factory=list)
    # (per_truck, per_class) when computed without an activity log
    precomputed_utilization: Optional[tuple] = None

    @property
    def accepted(self) -> bool:
        return not self.violations

    def utilization(self) -> tuple[dict[str, float], dict[str, float]]:
        if self.precomputed_utilization is not None:
            return self.precomputed_utilization
        return utilization(self.activity, self.makespan, self.truck_classes)


def utilization(activity: Iterable[ActivityRecord], horizon: float,
                truck_classes: dict[str, str]) -> tuple[dict[str, float], dict[str, float]]:
    """Per-truck and per-class mean utilization from an activity log.

    Busy time is loading + hauling + dumping + returning; the denominator is
    the horizon minus time spent idle-released.
    """
    if not horizon > 0:
        raise ValueError("utilization horizon must be > 0")
    busy = {tid: 0.0 for tid in truck_classes}
    released = {tid: 0.0 for tid in truck_classes}
    state = {tid: "at-plant-queue" for tid in truck_classes}
    since = {tid: 0.0 for tid in truck_classes}
    for rec in activity:
        t, tid, _, to_state, _ = rec
        t = min(t, horizon)
        dt = t - since[tid]
        if state[tid] in BUSY_STATES:
            busy[tid] += dt
        elif state[tid] == "idle-released":
            released[tid] += dt
        state[tid] = to_state
        since[tid] = t
    for tid in truck_classes:
        dt = horizon - since[tid]
        if dt > 0:
            if state[tid] in BUSY_STATES:
                busy[tid] += dt
            elif state[tid] == "idle-released":
                released[tid] += dt
    per_truck: dict[str, float] = {}
    for tid in truck_classes:
        active = horizon - released[tid]
        per_truck[tid] = busy[tid] / active if active > 0 else 0.0
    per_class: dict[str, float] = {}
    for name in sorted(set(truck_classes.values())):
        vals = [per_truck[t] for t, c in truck_classes.items() if c == name]
        per_class[name] = math.fsum(vals) / len(vals)
    return per_truck, per_class


# -- the model --------------------------------------------------------------


def _audit_default() -> bool:
    return os.environ.get("RCCSIM_AUDIT", "") not in ("", "0")


class SupplyModel:
    """Hybrid model of concrete supply to a single paver.

    ``travel_override`` maps a class name to fixed ``(loaded, empty)`` travel
    minutes, bypassing the moving-front geometry.
    """

    def __init__(
        self,
        road: RoadSpec,
        speeds: SpeedSpec,
        classes: dict[str, TruckClass],
        fleet: dict[str, int],
        paver: PaverSpec = PaverSpec(),
        constraints: ConstraintSpec = ConstraintSpec(),
        dispatch: DispatchSpec = DispatchSpec(),
        controller: Optional["FleetController"] = None,
        *,
        travel_override: Optional[dict[str, tuple[float, float]]] = None,
        audit: Optional[bool] = None,
        record_trace: bool = False,
        time_limit: Optional[float] = None,
    ) -> None:
        for name, klass in classes.items():
            if klass.capacity > paver.hopper_capacity:
                raise ValueError(
                    f"trucks.{name}.capacity {klass.capacity} exceeds paver.hopper_capacity "
                    f"{paver.hopper_capacity}; the truck could never dump"
                )
        self.road = road
        self.speeds = speeds
        self.classes = dict(classes)
        self.fleet = {name: int(fleet.get(name, 0)) for name in classes}
        self.paver_spec = paver
        self.constraints = constraints
        self.dispatch = dispatch
        self.controller = controller
        self.travel_override = travel_override
        self.audit = _audit_default() if audit is None else audit
        self.total_volume = road.total_volume
        r = paver.placement_rate
        self.time_limit = time_limit if time_limit is not None else 50.0 * self.total_volume / r + 1e4

        if dispatch.priority is None:
            self.priority = sorted(self.classes, key=lambda n: (-self.classes[n].capacity, n))
        else:
            self.priority = [n for n in dispatch.priority if n in self.classes]

        self.kernel = Kernel(record_trace=record_trace)
        self.paver = PaverState(
            hopper=ContinuousLevel(0.0),
            hopper_capacity=paver.hopper_capacity,
            placement_rate=r,
            placed=ContinuousLevel(0.0),
        )
        self.trucks: list[Truck] = []
        self.plant_queue: dict[str, deque[Truck]] = {n: deque() for n in self.classes}
        self.released_pool: dict[str, deque[Truck]] = {n: deque() for n in self.classes}
        # finished plant-queue waiting time per class, for idle-excess detection
        self.plant_wait: dict[str, float] = {n: 0.0 for n in self.classes}
        for name in self.priority + [n for n in self.classes if n not in self.priority]:
            prefix = name[0].upper()
            for i in range(self.fleet[name]):
                self.trucks.append(Truck(f"{prefix}{i + 1}", self.classes[name]))
        self.by_id = {t.id: t for t in self.trucks}

        self.activity: list[ActivityRecord] = []
        self.paver_queue: deque[Truck] = deque()
        self.dumping: Optional[Truck] = None
        self.loading: Optional[Truck] = None
        self.hauling: set[Truck] = set()
        self.arrivals: list[float] = []
        self.arrival_trucks: list[str] = []
        self.departures: list[float] = []
        self.violations: list[Violation] = []
        self.loads = {n: 0 for n in self.classes}
        self.batched = 0.0
        self.discarded = 0.0
        self.complete = False
        self.makespan: Optional[float] = None
        self.stall_time = 0.0
        # waiting for the first delivery is not a stall
        self._stall_since: Optional[float] = None
        self._gate: Optional[Event] = None
        self._space_watch = None
        self._complete_watch = None
        self._dispatch_closed = False
        self._ran = False

        k = self.kernel
        self._stall_watch = k.watch(self.paver.hopper, 0.0, self._on_hopper_empty,
                                    kind="hopper-empty", actor="paver", priority=P_STALL)
        if self.audit:
            k.after_event = self._audit_event

    # -- helpers ------------------------------------------------------------

    def _log(self, truck: Truck, new_state: TruckState) -> None:
        self.activity.append(ActivityRecord(self.kernel.now, truck.id, truck.state.value,
                                            new_state.value, truck.load))
        truck.state = new_state

    def placed_now(self) -> float:
        return self.paver.placed.at(self.kernel.now)

    def current_distance(self) -> float:
        placed = min(self.placed_now(), self.total_volume)
        return haul_distance(front_position(placed, self.road), self.road)

    def travel_minutes(self, klass: TruckClass, loaded: bool) -> float:
        if self.travel_override is not None:
            fixed = self.travel_override[klass.name]
            return fixed[0] if loaded else fixed[1]
        speed = self.speeds.loaded_speed if loaded else self.speeds.empty_speed
        return travel_time(self.current_distance(), speed)

    def cycle_minutes(self, klass: TruckClass) -> float:
        """Unobstructed cycle time for a load dispatched now."""
        return (klass.load_duration + self.travel_minutes(klass, True)
                + klass.dump_duration + self.travel_minutes(klass, False))

    def in_transit(self) -> float:
        now = self.kernel.now
        return math.fsum(t.on_board(now) for t in self.trucks)

    def ledger(self) -> dict[str, float]:
        now = self.kernel.now
        return {
            "batched": self.batched,
            "in_transit": self.in_transit(),
            "hopper": self.paver.hopper.at(now),
            "placed": self.paver.placed.at(now),
            "discarded": self.discarded,
        }

    def _audit_event(self, _ev: Event) -> None:
        led = self.ledger()
        rhs = led["in_transit"] + led["hopper"] + led["placed"] + led["discarded"]
        if abs(led["batched"] - rhs) > MASS_TOLERANCE:
            raise ConservationError(f"mass ledger off by {led['batched'] - rhs:.3e} at t={self.kernel.now}: {led}")
        hopper = led["hopper"]
        if hopper < -MASS_TOLERANCE or hopper > self.paver.hopper_capacity + MASS_TOLERANCE:
            raise ConservationError(f"hopper level {hopper} out of range at t={self.kernel.now}")
        if self.loading is not None and sum(1 for t in self.trucks if t.state is TruckState.LOADING) != 1:
            raise ConservationError("loading bay serves more than one truck")
        if sum(1 for t in self.trucks if t.state is TruckState.DUMPING) > 1:
            raise ConservationError("more than one truck dumping")

    # -- continuous flows -----------------------------------------------------

    def _set_flows(self) -> None:
        """Recompute hopper and placement rates after any inflow or level change."""
        k = self.kernel
        now = k.now
        paver = self.paver
        if self.complete:
            return
        level = paver.hopper.advance(now)
        if self._dispatch_closed and paver.placed.advance(now) >= self.total_volume - MASS_TOLERANCE:
            # placement reached the job total as an inflow stopped; the crossing
            # would be cancelled by the rate change, or rounding left it short
            self._on_complete()
            return
        if level < SPACE_TOLERANCE:
            if level < -MASS_TOLERANCE:
                raise ConservationError(f"hopper level {level} below zero at t={now}")
            paver.hopper.level = 0.0
            place = min(paver.placement_rate, paver.inflow)
        else:
            place = paver.placement_rate
        stalled = place == 0.0
        if stalled != paver.stalled:
            if stalled:
                self._stall_since = now
            else:
                if self._stall_since is not None:
                    self.stall_time += now - self._stall_since
                self._stall_since = None
            paver.stalled = stalled
        k.update_rate(paver.hopper, paver.inflow - place)
        k.update_rate(paver.placed, place)

    def _on_hopper_empty(self) -> None:
        self._set_flows()
        # a space watch at threshold 0 is disarmed by the rate change above
        self._try_dump()
        self._plan()

    # -- plant --------------------------------------------------------------

    def _preferred_class(self) -> Optional[str]:
        ctl = self.controller
        for name in self.priority:
            if self.plant_queue[name]:
                return name
            if ctl is not None and ctl.can_supply(name):
                return name
        return None

    def _gate_time(self, klass: TruckClass) -> float:
        now = self.kernel.now
        paver = self.paver
        r = paver.placement_rate
        if math.isinf(r):
            return now
        lead = klass.load_duration + self.travel_minutes(klass, True)
        committed = self.batched - paver.placed.at(now)
        # hopper + queue volume we accept ahead of the new truck when it arrives
        allowed = paver.hopper_capacity - klass.capacity + r * self.dispatch.arrival_margin
        place_rate = paver.placed.rate
        if place_rate > 0.0:
            t = now + (committed - r * lead - allowed) / place_rate
        else:
            pending = [t.arrival_time for t in self.hauling]
            if not pending:
                return now
            resume = min(pending)
            t = resume - lead + (committed - allowed) / r
        return t if t > now else now

    def _plan(self) -> None:
        """(Re)schedule the plant's next load release."""
        if self.complete or self.loading is not None or self._dispatch_closed:
            self._cancel_gate()
            return
        name = self._preferred_class()
        if name is None:
            self._cancel_gate()
            if self.controller is not None and self.priority:
                self.controller.on_starved(self.priority[0])
            return
        t = self._gate_time(self.classes[name])
        gate = self._gate
        if gate is not None and not gate.cancelled:
            if abs(gate.time - t) <= 1e-9:
                return
            gate.cancelled = True
        self._gate = self.kernel.schedule(t, self._on_gate, priority=P_GATE, kind="gate", actor="plant")

    def _cancel_gate(self) -> None:
        if self._gate is not None:
            self._gate.cancelled = True
            self._gate = None

    def _on_gate(self) -> None:
        self._gate = None
        if self.loading is not None or self._dispatch_closed or self.complete:
            return
        truck = None
        ctl = self.controller
        for name in self.priority:
            q = self.plant_queue[name]
            if q:
                truck = q.popleft()
                self.plant_wait[name] += self.kernel.now - truck.queued_since
                break
            if ctl is not None and ctl.can_supply(name):
                truck = ctl.supply(name)
                break
        if truck is None:
            return
        self._start_loading(truck)

    def _start_loading(self, truck: Truck) -> None:
        k = self.kernel
        klass = truck.klass
        truck.load = klass.capacity
        self.batched += klass.capacity
        self.loads[klass.name] += 1
        self._log(truck, TruckState.LOADING)
        self.loading = truck
        if self.batched >= self.total_volume - MASS_TOLERANCE:
            self._dispatch_closed = True
            self._complete_watch = k.watch(self.paver.placed, self.total_volume, self._on_complete,
                                           kind="complete", actor="paver", priority=P_COMPLETE)
        k.schedule(k.now + klass.load_duration, lambda: self._on_load_end(truck),
                   priority=P_LOAD_END, kind="load-end", actor=truck.id)

    def _on_load_end(self, truck: Truck) -> None:
        k = self.kernel
        self.loading = None
        truck.batch_complete_time = k.now
        self._log(truck, TruckState.HAULING)
        truck.arrival_time = k.now + self.travel_minutes(truck.klass, True)
        self.hauling.add(truck)
        k.schedule(truck.arrival_time, lambda: self._on_arrive_paver(truck),
                   priority=P_ARRIVE_PAVER, kind="arrive-paver", actor=truck.id)
        self._plan()

    # -- paver --------------------------------------------------------------

    def _on_arrive_paver(self, truck: Truck) -> None:
        self.hauling.discard(truck)
        self.arrivals.append(self.kernel.now)
        self.arrival_trucks.append(truck.id)
        self._log(truck, TruckState.AT_PAVER_QUEUE)
        self.paver_queue.append(truck)
        self._try_dump()
        self._plan()

    def _try_dump(self) -> None:
        if self.dumping is not None or not self.paver_queue or self.complete:
            return
        k = self.kernel
        head = self.paver_queue[0]
        paver = self.paver
        free = paver.hopper_capacity - paver.hopper.at(k.now)
        if free >= head.klass.capacity - SPACE_TOLERANCE:
            self._clear_space_watch()
            self.paver_queue.popleft()
            self._start_dump(head)
            return
        threshold = paver.hopper_capacity - head.klass.capacity
        sw = self._space_watch
        if sw is not None and sw.threshold == threshold:
            return
        self._clear_space_watch()
        self._space_watch = k.watch(paver.hopper, threshold, self._on_space,
                                    kind="hopper-space", actor=head.id, priority=P_SPACE)

    def _clear_space_watch(self) -> None:
        if self._space_watch is not None:
            self.kernel.unwatch(self._space_watch)
            self._space_watch = None

    def _on_space(self) -> None:
        self._clear_space_watch()
        self._try_dump()
        self._plan()

    def _start_dump(self, truck: Truck) -> None:
        k = self.kernel
        klass = truck.klass
        self._log(truck, TruckState.DUMPING)
        truck.dump_start = k.now
        self.dumping = truck
        self.paver.inflow = klass.dump_rate
        self._set_flows()
        k.schedule(k.now + klass.dump_duration, lambda: self._on_dump_end(truck),
                   priority=P_DUMP_END, kind="dump-end", actor=truck.id)

    def _on_dump_end(self, truck: Truck) -> None:
        k = self.kernel
        now = k.now
        self.paver.inflow = 0.0
        self.dumping = None
        truck.load = 0.0
        truck.dump_start = None
        self._set_flows()
        self.departures.append(now)
        v = check_freshness(truck, now, self.constraints)
        if v is not None:
            self.violations.append(v)
        truck.batch_complete_time = None
        self._log(truck, TruckState.RETURNING)
        k.schedule(now + self.travel_minutes(truck.klass, False), lambda: self._on_arrive_plant(truck),
                   priority=P_ARRIVE_PLANT, kind="arrive-plant", actor=truck.id)
        self._try_dump()
        self._plan()

    def _on_arrive_plant(self, truck: Truck) -> None:
        if truck.marked:
            truck.marked = False
            self._release(truck)
        else:
            self._enqueue(truck)
        self._plan()

    def _enqueue(self, truck: Truck) -> None:
        self._log(truck, TruckState.AT_PLANT_QUEUE)
        truck.queued_since = self.kernel.now
        self.plant_queue[truck.klass.name].append(truck)

    def queued_wait_total(self, name: str) -> float:
        """Cumulative plant-queue waiting of class ``name`` up to now."""
        now = self.kernel.now
        return self.plant_wait[name] + math.fsum(now - t.queued_since for t in self.plant_queue[name])

    def release_from_queue(self, truck: Truck) -> None:
        self.plant_queue[truck.klass.name].remove(truck)
        self.plant_wait[truck.klass.name] += self.kernel.now - truck.queued_since
        self._release(truck)

    def _release(self, truck: Truck) -> None:
        self._log(truck, TruckState.IDLE_RELEASED)
        self.released_pool[truck.klass.name].append(truck)

    def _on_complete(self) -> None:
        k = self.kernel
        now = k.now
        self.complete = True
        self.makespan = now
        paver = self.paver
        paver.hopper.advance(now)
        paver.placed.advance(now)
        paver.placed.level = self.total_volume
        if paver.stalled and self._stall_since is not None:
            self.stall_time += now - self._stall_since
        self._stall_since = None
        leftover = paver.hopper.level + self.in_transit()
        self.discarded += leftover
        paver.hopper.level = 0.0
        paver.hopper.rate = 0.0
        paver.placed.rate = 0.0
        paver.inflow = 0.0
        for t in self.trucks:
            t.load = 0.0
            t.dump_start = None
        self._cancel_gate()

    # -- run ----------------------------------------------------------------

    def run(self) -> RunResult:
        if self._ran:
            raise RuntimeError("a SupplyModel instance runs once")
        self._ran = True
        k = self.kernel
        for t in self.trucks:
            self.activity.append(ActivityRecord(0.0, t.id, "at-plant-queue", "at-plant-queue", 0.0))
            self.plant_queue[t.klass.name].append(t)
        if self.controller is not None:
            self.controller.attach(self)
        self._plan()
        limit = self.time_limit

        def done() -> bool:
            if k.now > limit:
                raise StarvedModelError(f"no completion by t={k.now:g}")
            return self.complete

        k.run_until(done)
        interarrival = check_interarrival(self.arrivals, self.constraints,
                                          departures=self.departures, truck_ids=self.arrival_trucks)
        violations = sorted(self.violations + interarrival, key=lambda v: (v.time, v.kind, v.truck_id))
        return RunResult(
            makespan=self.makespan,
            fleet=dict(self.fleet),
            truck_classes={t.id: t.klass.name for t in self.trucks},
            activity=self.activity,
            arrivals=self.arrivals,
            arrival_trucks=self.arrival_trucks,
            departures=self.departures,
            violations=violations,
            batched=self.batched,
            placed=self.total_volume,
            discarded=self.discarded,
            stall_time=self.stall_time,
            loads=dict(self.loads),
            trace=k.trace,
            reviews=list(self.controller.diagnostics) if self.controller is not None else [],
        )
