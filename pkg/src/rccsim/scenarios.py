"""Fleet-composition sweep: enumerate, evaluate, filter and rank scenarios."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .adaptive import FleetController, ControlPolicy, fleet_schedule
from .config import ProjectConfig
from .kernel import StarvedModelError
from .process import RunResult, SupplyModel, Violation

OBJECTIVE_DIGITS = 12


class NoFeasibleScenario(RuntimeError):
    def __init__(self, message: str, closest: Optional["ScenarioResult"] = None) -> None:
        super().__init__(message)
        self.closest = closest


@dataclass(frozen=True)
class Scenario:
    n_large: int
    n_small: int
    id: int

    @property
    def fleet(self) -> dict[str, int]:
        return {"large": self.n_large, "small": self.n_small}

    @property
    def total_trucks(self) -> int:
        return self.n_large + self.n_small

    @property
    def label(self) -> str:
        return f"{self.n_large},{self.n_small}"


@dataclass(frozen=True)
class CostRates:
    truck_hourly: dict
    plant_hourly: float = 0.0
    paver_hourly: float = 0.0
    mobilization: float = 0.0

    def __post_init__(self) -> None:
        if min([self.plant_hourly, self.paver_hourly, self.mobilization, *self.truck_hourly.values()]) < 0:
            raise ValueError("cost rates must be >= 0")

    @classmethod
    def from_config(cls, cfg: ProjectConfig) -> "CostRates":
        c = cfg.costs
        return cls(dict(c.truck_hourly), c.plant_hourly, c.paver_hourly, c.mobilization)


@dataclass
class ScenarioResult:
    scenario: Scenario
    makespan: Optional[float]
    utilization: dict[str, float]
    violations: list[Violation]
    truck_hours: dict[str, float] = field(default_factory=dict)
    mobilizations: int = 0
    stall_time: float = 0.0
    loads: dict[str, int] = field(default_factory=dict)
    cost: float = 0.0
    diagnostic: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.diagnostic is None and not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)


def enumerate_grid(large: Sequence[int] = (1, 10), small: Sequence[int] = (1, 5)) -> list[Scenario]:
    """All (large, small) pairs, numbered small-major.

    The id runs through every large count for one small count before moving
    to the next small count, so with the default grid (9, 4) is number 39.
    """
    l_lo, l_hi = large
    s_lo, s_hi = small
    if l_hi < l_lo or s_hi < s_lo or min(l_lo, s_lo) < 0:
        raise ValueError(f"empty or invalid grid: large {l_lo}..{l_hi}, small {s_lo}..{s_hi}")
    width = l_hi - l_lo + 1
    out = []
    for s in range(s_lo, s_hi + 1):
        for n in range(l_lo, l_hi + 1):
            out.append(Scenario(n, s, (s - s_lo) * width + (n - l_lo) + 1))
    return out


def build_model(cfg: ProjectConfig, fleet: dict[str, int], controller=None, **kw) -> SupplyModel:
    return SupplyModel(
        cfg.road_spec(), cfg.speed_spec(), cfg.truck_classes(), fleet,
        cfg.paver_spec(), cfg.constraint_spec(), cfg.dispatch_spec(), controller, **kw,
    )


def run_fixed(cfg: ProjectConfig, fleet: dict[str, int], *, engine: str = "fast",
              keep_activity: bool = True, **kw) -> RunResult:
    model = build_model(cfg, fleet, **kw)
    if engine == "fast":
        from .fastpath import run_fast, supports

        if supports(model):
            return run_fast(model, keep_activity=keep_activity)
    elif engine != "reference":
        raise ValueError(f"unknown engine {engine!r}")
    return model.run()


def run_adaptive(cfg: ProjectConfig, fleet: dict[str, int], policy: Optional[ControlPolicy] = None,
                 **kw) -> tuple[RunResult, FleetController]:
    ctl = FleetController(policy if policy is not None else cfg.control_policy())
    model = build_model(cfg, fleet, controller=ctl, **kw)
    return model.run(), ctl


def cost(result: ScenarioResult, rates: CostRates) -> float:
    total = 0.0
    for name, hours in sorted(result.truck_hours.items()):
        total += hours * rates.truck_hourly.get(name, 0.0)
    if result.makespan is not None:
        total += (rates.plant_hourly + rates.paver_hourly) * result.makespan / 60.0
    total += rates.mobilization * result.mobilizations
    return total


def summarize(scenario: Scenario, run: RunResult, rates: Optional[CostRates] = None,
              adaptive: bool = False) -> ScenarioResult:
    """Project a run onto the scenario table row."""
    _, per_class = run.utilization()
    if adaptive:
        sched = fleet_schedule(run.activity, run.truck_classes, run.makespan)
        hours = sched.class_hours()
        remob = sum(1 for r in run.activity if r.from_state == "idle-released")
        mobilizations = sum(run.fleet.values()) + remob
    else:
        hours = {n: c * run.makespan / 60.0 for n, c in sorted(run.fleet.items()) if c > 0}
        mobilizations = sum(run.fleet.values())
    res = ScenarioResult(
        scenario=scenario,
        makespan=run.makespan,
        utilization=per_class,
        violations=list(run.violations),
        truck_hours=hours,
        mobilizations=mobilizations,
        stall_time=run.stall_time,
        loads=dict(run.loads),
    )
    if rates is not None:
        res.cost = cost(res, rates)
    return res


def evaluate(scenario: Scenario, cfg: ProjectConfig, *, engine: str = "fast") -> ScenarioResult:
    rates = CostRates.from_config(cfg)
    try:
        run = run_fixed(cfg, scenario.fleet, engine=engine, keep_activity=False)
    except StarvedModelError as e:
        return ScenarioResult(scenario, None, {}, [], diagnostic=f"starved model: {e}")
    return summarize(scenario, run, rates)


def _evaluate_args(args) -> ScenarioResult:
    scenario, cfg, engine = args
    return evaluate(scenario, cfg, engine=engine)


def sweep(cfg: ProjectConfig, *, workers: int = 1, engine: str = "fast",
          scenarios: Optional[list[Scenario]] = None) -> list[ScenarioResult]:
    """Evaluate every scenario; results come back in id order whatever ``workers`` is."""
    if scenarios is None:
        scenarios = enumerate_grid(cfg.grid.large, cfg.grid.small)
    jobs = [(s, cfg, engine) for s in scenarios]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_args, jobs))
    else:
        results = [_evaluate_args(j) for j in jobs]
    return sorted(results, key=lambda r: r.scenario.id)


def objective(result: ScenarioResult, kind: str = "mean", capacities: Optional[dict] = None) -> float:
    """Mean of the class mean utilizations over classes present in the fleet."""
    fleet = result.scenario.fleet
    names = [n for n in sorted(result.utilization) if fleet.get(n, 0) > 0]
    if not names:
        return 0.0
    if kind == "mean":
        return math.fsum(result.utilization[n] for n in names) / len(names)
    if kind == "capacity-weighted":
        if capacities is None:
            raise ValueError("capacity-weighted objective needs class capacities")
        w = [capacities[n] for n in names]
        return math.fsum(result.utilization[n] * c for n, c in zip(names, w)) / math.fsum(w)
    raise ValueError(f"unknown objective {kind!r}")


def closest_to_feasible(results: Sequence[ScenarioResult]) -> Optional[ScenarioResult]:
    def key(r: ScenarioResult):
        starved = r.diagnostic is not None
        excess = math.fsum(v.magnitude for v in r.violations)
        return (starved, len(r.violations), excess, r.scenario.id)

    return min(results, key=key) if results else None


def rank(results: Sequence[ScenarioResult], kind: str = "mean",
         capacities: Optional[dict] = None) -> list[ScenarioResult]:
    """Accepted results, best first.

    Ties on the objective (compared at 12 decimals) go to fewer trucks, then
    lower cost, then lower id.
    """
    accepted = [r for r in results if r.accepted]
    if not accepted:
        best = closest_to_feasible(results)
        msg = "no feasible scenario"
        if best is not None:
            what = best.diagnostic or f"{len(best.violations)} violations"
            msg += f"; closest is #{best.scenario.id} ({best.scenario.label}) with {what}"
        raise NoFeasibleScenario(msg, best)

    def key(r: ScenarioResult):
        obj = round(objective(r, kind, capacities), OBJECTIVE_DIGITS)
        return (-obj, r.scenario.total_trucks, round(r.cost, 6), r.scenario.id)

    return sorted(accepted, key=key)
