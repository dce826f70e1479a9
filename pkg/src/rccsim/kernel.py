"""Event calendar with piecewise-linear continuous levels.

The calendar is a binary heap keyed on ``(time, priority, seq)``.  Cancellation
is lazy: a cancelled event stays in the heap and is skipped when popped.

Continuous quantities are restricted to levels with a constant rate between
events, so threshold crossings are solved in closed form and fire at the
analytic crossing time.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Union

LEVEL_TOLERANCE = 1e-9


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


class StarvedModelError(RuntimeError):
    """The calendar ran dry before the completion predicate held."""


class ConservationError(RuntimeError):
    """A continuous level went negative beyond tolerance."""


class Event:
    __slots__ = ("time", "priority", "seq", "action", "kind", "actor", "cancelled")

    def __init__(self, time: float, priority: int, seq: int, action: Callable[[], Any],
                 kind: str = "", actor: str = "") -> None:
        self.time = time
        self.priority = priority
        self.seq = seq
        self.action = action
        self.kind = kind
        self.actor = actor
        self.cancelled = False

    @property
    def key(self) -> tuple[float, int, int]:
        return (self.time, self.priority, self.seq)

    def __lt__(self, other: "Event") -> bool:
        return self.key < other.key

    def __repr__(self) -> str:
        flag = " cancelled" if self.cancelled else ""
        return f"Event({self.kind}@{self.time:g} p={self.priority} #{self.seq} {self.actor}{flag})"


class TraceEntry(NamedTuple):
    time: float
    priority: int
    seq: int
    kind: str
    actor: str


@dataclass(slots=True)
class ContinuousLevel:
    """A quantity that changes linearly between events."""

    level: float
    rate: float = 0.0
    last_update: float = 0.0
    watches: list = field(default_factory=list, repr=False, compare=False)

    def at(self, t: float) -> float:
        return self.level + self.rate * (t - self.last_update)

    def advance(self, t: float) -> float:
        if t != self.last_update:
            self.level += self.rate * (t - self.last_update)
            self.last_update = t
        return self.level


def time_to_cross(lv: ContinuousLevel, threshold: float, now: Optional[float] = None) -> Optional[float]:
    """Earliest ``t >= now`` with ``lv.at(t) == threshold``, or ``None``."""
    if now is None:
        now = lv.last_update
    current = lv.at(now)
    if current == threshold:
        return now
    if lv.rate == 0.0:
        return None
    dt = (threshold - current) / lv.rate
    if dt < 0.0:
        return None
    return now + dt


def update_rate(lv: ContinuousLevel, new_rate: float, at: float) -> ContinuousLevel:
    """Advance ``lv`` to ``at`` under its old rate, then switch to ``new_rate``.

    Tiny negative excursions (within ``LEVEL_TOLERANCE``) are snapped to zero;
    anything beyond that is a conservation bug.
    """
    if at < lv.last_update:
        raise SchedulingError(f"rate update at {at} precedes last update {lv.last_update}")
    level = lv.advance(at)
    if level < 0.0:
        if level < -LEVEL_TOLERANCE:
            raise ConservationError(f"level {level!r} below zero at t={at}")
        lv.level = 0.0
    lv.rate = new_rate
    return lv


class LevelWatch:
    """Fires ``action`` when a level reaches ``threshold`` from its current side."""

    __slots__ = ("level", "threshold", "action", "kind", "actor", "priority", "event")

    def __init__(self, level: ContinuousLevel, threshold: float, action: Callable[[], Any],
                 kind: str, actor: str, priority: int) -> None:
        self.level = level
        self.threshold = threshold
        self.action = action
        self.kind = kind
        self.actor = actor
        self.priority = priority
        self.event: Optional[Event] = None


StopCondition = Union[None, float, Callable[[], bool]]


class Kernel:
    """Single-threaded deterministic event calendar.

    Actions must not call :meth:`run_until` or :meth:`step` reentrantly.
    """

    def __init__(self, record_trace: bool = True) -> None:
        self.now = 0.0
        self.record_trace = record_trace
        self.trace: list[TraceEntry] = []
        self.after_event: Optional[Callable[[Event], None]] = None
        self._heap: list[tuple[float, int, int, Event]] = []
        self._seq = itertools.count()
        self._running = False

    def __len__(self) -> int:
        return sum(1 for *_, ev in self._heap if not ev.cancelled)

    def schedule(self, time: float, action: Callable[[], Any], *, priority: int = 0,
                 kind: str = "", actor: str = "") -> Event:
        if time < self.now or math.isnan(time):
            raise SchedulingError(f"cannot schedule {kind or action!r} at {time} (now={self.now})")
        seq = next(self._seq)
        ev = Event(time, priority, seq, action, kind, actor)
        heapq.heappush(self._heap, (time, priority, seq, ev))
        return ev

    def schedule_in(self, delay: float, action: Callable[[], Any], **kw: Any) -> Event:
        return self.schedule(self.now + delay, action, **kw)

    @staticmethod
    def cancel(event: Optional[Event]) -> None:
        if event is not None:
            event.cancelled = True

    def peek(self) -> Optional[Event]:
        heap = self._heap
        while heap and heap[0][3].cancelled:
            heapq.heappop(heap)
        return heap[0][3] if heap else None

    def step(self) -> Event:
        heap = self._heap
        while True:
            ev = heapq.heappop(heap)[3]
            if not ev.cancelled:
                break
        self.now = ev.time
        ev.cancelled = True  # fired events cannot be cancelled afterwards
        if self.record_trace:
            self.trace.append(TraceEntry(ev.time, ev.priority, ev.seq, ev.kind, ev.actor))
        ev.action()
        if self.after_event is not None:
            self.after_event(ev)
        return ev

    def run_until(self, stop: StopCondition = None) -> list[TraceEntry]:
        """Fire events until ``stop`` is met.

        ``stop`` may be ``None`` (drain the calendar), a time (fire everything
        at or before it, then set the clock there), or a predicate checked
        before every event.  A predicate that is still false when the calendar
        is exhausted raises :class:`StarvedModelError`.
        """
        if self._running:
            raise RuntimeError("run_until is not reentrant")
        self._running = True
        start = len(self.trace)
        try:
            if callable(stop):
                while not stop():
                    if self.peek() is None:
                        raise StarvedModelError(f"calendar exhausted at t={self.now} before completion")
                    self.step()
            elif stop is None:
                while self.peek() is not None:
                    self.step()
            else:
                horizon = float(stop)
                while True:
                    nxt = self.peek()
                    if nxt is None or nxt.time > horizon:
                        break
                    self.step()
                if horizon > self.now:
                    self.now = horizon
        finally:
            self._running = False
        return self.trace[start:]

    # -- continuous levels -------------------------------------------------

    def watch(self, level: ContinuousLevel, threshold: float, action: Callable[[], Any], *,
              kind: str = "crossing", actor: str = "", priority: int = 0) -> LevelWatch:
        w = LevelWatch(level, threshold, action, kind, actor, priority)
        level.watches.append(w)
        self._arm(w)
        return w

    def unwatch(self, w: Optional[LevelWatch]) -> None:
        if w is None:
            return
        self.cancel(w.event)
        w.event = None
        try:
            w.level.watches.remove(w)
        except ValueError:
            pass

    def update_rate(self, level: ContinuousLevel, new_rate: float) -> ContinuousLevel:
        """Change a level's rate now and reschedule its pending crossings."""
        old_rate = level.rate
        update_rate(level, new_rate, self.now)
        if new_rate != old_rate:
            for w in level.watches:
                self._arm(w)
        return level

    def _arm(self, w: LevelWatch) -> None:
        lv = w.level
        current = lv.at(self.now)
        rate = lv.rate
        t = None
        if rate != 0.0 and current != w.threshold:
            dt = (w.threshold - current) / rate
            if dt >= 0.0:
                t = self.now + dt
        old = w.event
        if old is not None and not old.cancelled:
            if t is not None and old.time == t:
                return
            old.cancelled = True
        if t is None:
            w.event = None
            return

        def fire(w: LevelWatch = w) -> None:
            w.event = None
            lv = w.level
            lv.advance(self.now)
            lv.level = w.threshold
            w.action()

        w.event = self.schedule(t, fire, priority=w.priority, kind=w.kind, actor=w.actor)
