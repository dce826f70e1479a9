"""Feedback control of the active truck fleet.

The controller reviews the fleet at a fixed interval and compares each
controlled class against the number of trucks the current haul needs to keep
the paver fed.  Surplus trucks are released to an idle pool and recalled when
the haul lengthens or the plant finds nobody to load.

Four loops act on the fleet:

1. large-truck target from the unobstructed cycle time,
2. the same law for small trucks (only with ``small_fleet_controlled``),
3. starvation recall: when the plant gate opens and no truck of the preferred
   class is waiting, a released truck is recalled on the spot and the class
   target is held at that level until the next review,
4. idle-excess release: trucks that sat in the plant queue on average over
   the last review period are released even if loop 1 would keep them.

Decisions outside the hysteresis band are acted on; with an infinite band the
controller never changes the fleet and the run matches a fixed-fleet run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional

from .process import P_MOBILIZED, P_REVIEW, ActivityRecord, Truck, TruckState

if TYPE_CHECKING:
    from .process import SupplyModel

SLACK = 1e-9


@dataclass(frozen=True)
class ControlPolicy:
    review_interval: float = 60.0
    hysteresis_band: float = 1.0
    min_active: dict = field(default_factory=lambda: {"large": 1})
    max_active: Optional[dict] = None
    mobilization_delay: float = 0.0
    small_fleet_controlled: bool = False
    starvation_recall: bool = True
    idle_release: bool = True

    def __post_init__(self) -> None:
        if not self.review_interval > 0:
            raise ValueError("control.review_interval must be > 0")
        if self.hysteresis_band < 0:
            raise ValueError("control.hysteresis_band must be >= 0")
        if self.mobilization_delay < 0:
            raise ValueError("control.mobilization_delay must be >= 0")
        for n, v in (self.min_active or {}).items():
            if v < 0:
                raise ValueError(f"control.min_active.{n} must be >= 0")
            hi = (self.max_active or {}).get(n)
            if hi is not None and hi < v:
                raise ValueError(f"control.max_active.{n} is below min_active")


def required_fleet(cycle_time: float, dump_interval: float) -> int:
    """Trucks needed so one arrives every ``dump_interval`` minutes."""
    if not dump_interval > 0:
        raise ValueError("dump interval must be > 0")
    return max(1, math.ceil(cycle_time / dump_interval - SLACK))


@dataclass(frozen=True)
class StockFlowState:
    """Fleet stocks of one class at a review instant."""

    time: float
    truck_class: str
    active: int
    marked: int
    released: int
    mobilizing: int

    @property
    def effective(self) -> int:
        return self.active - self.marked + self.mobilizing


class FleetController:
    def __init__(self, policy: ControlPolicy) -> None:
        self.policy = policy
        self.model: Optional["SupplyModel"] = None
        self.diagnostics: list[dict] = []
        self.stocks: list[StockFlowState] = []
        self._floor: dict[str, int] = {}
        self._floor_until: dict[str, float] = {}
        self._mobilizing: dict[str, int] = {}
        self._last_wait: dict[str, float] = {}
        self._last_review = 0.0

    @property
    def controlled(self) -> list[str]:
        names = ["large"]
        if self.policy.small_fleet_controlled:
            names.append("small")
        return [n for n in names if self.model is not None and n in self.model.classes]

    def attach(self, model: "SupplyModel") -> None:
        if self.model is not None:
            raise RuntimeError("controller already attached")
        self.model = model
        for name in model.classes:
            self._mobilizing[name] = 0
            self._last_wait[name] = 0.0
        self._schedule_review(self.policy.review_interval)

    def _schedule_review(self, t: float) -> None:
        self.model.kernel.schedule(t, self.review, priority=P_REVIEW, kind="review", actor="controller")

    # -- stocks -------------------------------------------------------------

    def _trucks(self, name: str) -> list[Truck]:
        return [t for t in self.model.trucks if t.klass.name == name]

    def stock(self, name: str) -> StockFlowState:
        trucks = self._trucks(name)
        released = sum(1 for t in trucks if t.state is TruckState.IDLE_RELEASED)
        marked = sum(1 for t in trucks if t.marked)
        return StockFlowState(self.model.kernel.now, name, len(trucks) - released, marked,
                              released, self._mobilizing[name])

    # -- loop 3 -------------------------------------------------------------

    def can_supply(self, name: str) -> bool:
        if not self.policy.starvation_recall or name not in self.controlled:
            return False
        if self.policy.mobilization_delay > 0:
            return False
        return bool(self.model.released_pool[name])

    def supply(self, name: str) -> Truck:
        model = self.model
        truck = model.released_pool[name].popleft()
        now = model.kernel.now
        eff = self.stock(name).effective + 1  # the truck leaves the pool when loading starts
        self._floor[name] = eff
        self._floor_until[name] = now + self.policy.review_interval
        self.diagnostics.append({"time": now, "truck_class": name, "event": "starvation-recall",
                                 "truck": truck.id, "effective": eff})
        return truck

    def on_starved(self, name: str) -> None:
        """The plant has nothing to load; with a mobilization delay, start one recall."""
        if not self.policy.starvation_recall or name not in self.controlled:
            return
        if self.policy.mobilization_delay <= 0 or self._mobilizing[name]:
            return
        if self.model.released_pool[name]:
            self._mobilize(name, 1)
            self.diagnostics.append({"time": self.model.kernel.now, "truck_class": name,
                                     "event": "starvation-mobilize"})

    # -- periodic review ----------------------------------------------------

    def review(self) -> None:
        model = self.model
        if model.complete:
            return
        now = model.kernel.now
        window = now - self._last_review
        p = self.policy
        changed = False
        for name in self.controlled:
            klass = model.classes[name]
            cycle = model.cycle_minutes(klass)
            interval = klass.capacity / model.paver.placement_rate
            req = required_fleet(cycle, interval)
            floor = self._floor.get(name, 0) if self._floor_until.get(name, -1.0) > now else 0
            total_wait = model.queued_wait_total(name)
            avg_idle = (total_wait - self._last_wait[name]) / window if window > 0 else 0.0
            self._last_wait[name] = total_wait
            st = self.stock(name)
            self.stocks.append(st)
            eff = st.effective
            target = max(req, floor)
            excess = 0
            if p.idle_release:
                # keep one idle truck as a spare
                excess = max(0, math.floor(avg_idle + SLACK) - 1)
                if excess:
                    target = min(target, eff - excess)
            lo = (p.min_active or {}).get(name, 0)
            hi = (p.max_active or {}).get(name)
            target = max(target, lo, floor)
            if hi is not None:
                target = min(target, hi)
            target = min(target, len(self._trucks(name)))
            action = "hold"
            n = 0
            if target < eff - p.hysteresis_band:
                n = eff - target
                self._release(name, n)
                action = "release"
                changed = True
            elif target > eff + p.hysteresis_band:
                n = target - eff
                self._activate(name, n)
                action = "activate"
                changed = True
            self.diagnostics.append({
                "time": now, "truck_class": name, "event": "review", "cycle": cycle,
                "required": req, "floor": floor, "idle_excess": excess,
                "effective": eff, "target": target, "action": action, "count": n,
            })
        self._last_review = now
        self._schedule_review(now + p.review_interval)
        if changed:
            model._plan()

    # -- actions ------------------------------------------------------------

    def _release(self, name: str, n: int) -> None:
        model = self.model
        # idle trucks first, most recently queued first
        for truck in reversed(list(model.plant_queue[name])):
            if n == 0:
                return
            model.release_from_queue(truck)
            n -= 1
        # then mark in-flight trucks; they finish their cycle before release
        for truck in sorted(self._trucks(name), key=lambda t: t.id, reverse=True):
            if n == 0:
                return
            if truck.marked or truck.state in (TruckState.IDLE_RELEASED, TruckState.AT_PLANT_QUEUE):
                continue
            truck.marked = True
            n -= 1

    def _activate(self, name: str, n: int) -> None:
        for truck in self._trucks(name):
            if n == 0:
                return
            if truck.marked:
                truck.marked = False
                n -= 1
        if n:
            self._mobilize(name, n)

    def _mobilize(self, name: str, n: int) -> None:
        model = self.model
        pool = model.released_pool[name]
        delay = self.policy.mobilization_delay
        for _ in range(min(n, len(pool))):
            truck = pool.popleft()
            if delay > 0:
                self._mobilizing[name] += 1
                model.kernel.schedule(model.kernel.now + delay, lambda t=truck: self._arrive(t),
                                      priority=P_MOBILIZED, kind="mobilized", actor=truck.id)
            else:
                model._enqueue(truck)

    def _arrive(self, truck: Truck) -> None:
        self._mobilizing[truck.klass.name] -= 1
        if self.model.complete:
            self.model.released_pool[truck.klass.name].append(truck)
            return
        self.model._enqueue(truck)
        self.model._plan()


# -- fleet schedule ---------------------------------------------------------


@dataclass(frozen=True)
class FleetSchedule:
    """Active trucks per class as a step function of time."""

    classes: tuple[str, ...]
    steps: tuple[tuple[float, tuple[int, ...]], ...]
    horizon: float

    def counts_at(self, t: float) -> dict[str, int]:
        current = self.steps[0][1]
        for time, counts in self.steps:
            if time > t:
                break
            current = counts
        return dict(zip(self.classes, current))

    def class_hours(self) -> dict[str, float]:
        """Active truck-hours per class (the integral of the step function)."""
        totals = [0.0] * len(self.classes)
        for i, (time, counts) in enumerate(self.steps):
            end = self.steps[i + 1][0] if i + 1 < len(self.steps) else self.horizon
            for j, c in enumerate(counts):
                totals[j] += c * (end - time)
        return {name: totals[j] / 60.0 for j, name in enumerate(self.classes) if totals[j] > 0}

    def truck_hours(self) -> float:
        return math.fsum(self.class_hours().values())


def fleet_schedule(activity: Iterable[ActivityRecord], truck_classes: dict[str, str],
                   horizon: float) -> FleetSchedule:
    classes = tuple(sorted(set(truck_classes.values())))
    idx = {c: i for i, c in enumerate(classes)}
    counts = [0] * len(classes)
    for c in truck_classes.values():
        counts[idx[c]] += 1
    steps: list[tuple[float, tuple[int, ...]]] = [(0.0, tuple(counts))]
    for t, tid, frm, to, _ in activity:
        if t > horizon:
            break
        delta = (to == "idle-released") - (frm == "idle-released")
        if not delta:
            continue
        counts[idx[truck_classes[tid]]] -= delta
        snap = tuple(counts)
        if steps[-1][0] == t:
            steps[-1] = (t, snap)
        else:
            steps.append((t, snap))
    merged = [steps[0]]
    for s in steps[1:]:
        if s[1] != merged[-1][1]:
            merged.append(s)
    return FleetSchedule(classes, tuple(merged), horizon)
