"""Tabular outputs: every number here is a projection of a run's activity log."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .adaptive import FleetSchedule, fleet_schedule
from .process import BUSY_STATES, RunResult
from .scenarios import ScenarioResult, objective

TABLE_COLUMNS = [
    "id", "n_large", "n_small", "makespan_min", "util_large_pct", "util_small_pct",
    "objective_pct", "freshness_violations", "interarrival_violations", "violations",
    "accepted", "truck_hours", "cost", "rank", "diagnostic",
]


def fmt(x: Optional[float], decimals: int) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{decimals}f}"


def scenario_rows(results: Sequence[ScenarioResult], ranked: Sequence[ScenarioResult],
                  decimals: int = 4, kind: str = "mean", capacities: Optional[dict] = None) -> list[dict]:
    order = {r.scenario.id: i + 1 for i, r in enumerate(ranked)}
    rows = []
    for r in sorted(results, key=lambda r: r.scenario.id):
        s = r.scenario
        util = r.utilization
        done = r.diagnostic is None
        rows.append({
            "id": s.id,
            "n_large": s.n_large,
            "n_small": s.n_small,
            "makespan_min": fmt(r.makespan, decimals),
            "util_large_pct": fmt(100 * util["large"], decimals) if done and s.n_large else "",
            "util_small_pct": fmt(100 * util["small"], decimals) if done and s.n_small else "",
            "objective_pct": fmt(100 * objective(r, kind, capacities), decimals) if done else "",
            "freshness_violations": r.count("freshness"),
            "interarrival_violations": r.count("interarrival"),
            "violations": len(r.violations),
            "accepted": "yes" if r.accepted else "no",
            "truck_hours": fmt(math.fsum(r.truck_hours.values()), decimals) if done else "",
            "cost": fmt(r.cost, 2) if done else "",
            "rank": order.get(s.id, ""),
            "diagnostic": r.diagnostic or "",
        })
    return rows


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\r\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- per-run series ---------------------------------------------------------


@dataclass(frozen=True)
class WindowPoint:
    start: float
    end: float
    active: float  # truck-minutes not idle-released
    busy: float  # truck-minutes in a busy state

    @property
    def utilization(self) -> float:
        return self.busy / self.active if self.active > 0 else 0.0


def utilization_series(run: RunResult, truck_class: str, window: float = 60.0) -> list[WindowPoint]:
    """Busy share of the class's active truck-time in tumbling windows."""
    if not window > 0:
        raise ValueError("window must be > 0")
    horizon = run.makespan
    trucks = {t for t, c in run.truck_classes.items() if c == truck_class}
    n = max(1, math.ceil(horizon / window)) if horizon > 0 else 0
    active = [0.0] * n
    busy = [0.0] * n

    def spread(a: float, b: float, target: list[float]) -> None:
        if b <= a:
            return
        i = int(a // window)
        while i < n and i * window < b:
            lo = max(a, i * window)
            hi = min(b, (i + 1) * window, horizon)
            if hi > lo:
                target[i] += hi - lo
            i += 1

    state = {t: "at-plant-queue" for t in trucks}
    since = {t: 0.0 for t in trucks}

    def close(tid: str, t: float) -> None:
        s = state[tid]
        if s != "idle-released":
            spread(since[tid], t, active)
            if s in BUSY_STATES:
                spread(since[tid], t, busy)

    for t, tid, _, to_state, _ in run.activity:
        if tid not in trucks:
            continue
        t = min(t, horizon)
        close(tid, t)
        state[tid] = to_state
        since[tid] = t
    for tid in sorted(trucks):
        close(tid, horizon)
    return [WindowPoint(i * window, min((i + 1) * window, horizon), active[i], busy[i]) for i in range(n)]


def time_weighted_mean(series: Sequence[WindowPoint]) -> float:
    span = math.fsum(p.end - p.start for p in series)
    if span <= 0:
        return 0.0
    return math.fsum(p.utilization * (p.end - p.start) for p in series) / span


def series_rows(series: Sequence[WindowPoint], decimals: int) -> list[dict]:
    return [{
        "window_start": fmt(p.start, decimals),
        "window_end": fmt(p.end, decimals),
        "active_truck_min": fmt(p.active, decimals),
        "busy_truck_min": fmt(p.busy, decimals),
        "utilization": fmt(p.utilization, decimals + 2),
    } for p in series]


SERIES_COLUMNS = ["window_start", "window_end", "active_truck_min", "busy_truck_min", "utilization"]


def schedule_rows(sched: FleetSchedule, decimals: int) -> list[dict]:
    return [{"time": fmt(t, decimals), **dict(zip(sched.classes, counts))} for t, counts in sched.steps]


def violation_rows(run: RunResult, decimals: int) -> list[dict]:
    return [{"kind": v.kind, "time": fmt(v.time, decimals), "magnitude": fmt(v.magnitude, decimals),
             "truck_id": v.truck_id} for v in run.violations]


VIOLATION_COLUMNS = ["kind", "time", "magnitude", "truck_id"]


def run_summary(run: RunResult, result: ScenarioResult, decimals: int) -> dict:
    """Run-level numbers for ``run_meta.json``."""
    _, per_class = run.utilization()
    s = result.scenario
    return {
        "scenario": {"id": s.id, "n_large": s.n_large, "n_small": s.n_small},
        "makespan_min": round(run.makespan, decimals),
        "utilization": {k: round(v, decimals + 2) for k, v in sorted(per_class.items())},
        "violations": {"freshness": result.count("freshness"),
                       "interarrival": result.count("interarrival")},
        "accepted": result.accepted,
        "stall_min": round(run.stall_time, decimals),
        "loads": dict(sorted(run.loads.items())),
        "truck_hours": {k: round(v, decimals) for k, v in sorted(result.truck_hours.items())},
        "mobilizations": result.mobilizations,
        "cost": round(result.cost, 2),
        "mass_ledger": {
            "batched": round(run.batched, 6),
            "placed": round(run.placed, 6),
            "discarded": round(run.discarded, 6),
            "in_transit_at_end": 0.0,
            "hopper_at_end": 0.0,
        },
    }


class ReportWriter:
    """Writes report files into ``out_dir`` as CSV (default) or JSON."""

    def __init__(self, out_dir: Path, fmt: str = "csv", decimals: int = 4) -> None:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}")
        self.out_dir = Path(out_dir)
        self.fmt = fmt
        self.decimals = decimals
        self.written: list[Path] = []

    def _write(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(text)
        self.written.append(path)
        return path

    def table(self, stem: str, rows: list[dict], columns: list[str]) -> Path:
        if self.fmt == "csv":
            return self._write(self.out_dir / f"{stem}.csv", to_csv(rows, columns))
        return self._write(self.out_dir / f"{stem}.json", to_json(rows))

    def json_file(self, name: str, data) -> Path:
        return self._write(self.out_dir / name, to_json(data))

    def meta(self, data: dict) -> Path:
        return self.json_file("run_meta.json", data)

    def run_files(self, run: RunResult, window: float, schedule: Optional[FleetSchedule] = None) -> dict:
        d = self.decimals
        classes = sorted(set(run.truck_classes.values()))
        series = {}
        for name in classes:
            series[name] = utilization_series(run, name, window)
            self.table(f"utilization_{name}", series_rows(series[name], d), SERIES_COLUMNS)
        if schedule is None:
            schedule = fleet_schedule(run.activity, run.truck_classes, run.makespan)
        self.table("fleet_schedule", schedule_rows(schedule, d), ["time", *schedule.classes])
        self.table("violations", violation_rows(run, d), VIOLATION_COLUMNS)
        return series
