"""Command-line entry point: ``rccsim simulate|sweep|adapt``."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .adaptive import fleet_schedule
from .config import ConfigError, ProjectConfig, load_config
from .kernel import StarvedModelError
from .report import (
    TABLE_COLUMNS,
    ReportWriter,
    fmt,
    run_summary,
    scenario_rows,
    time_weighted_mean,
    utilization_series,
)
from .scenarios import (
    CostRates,
    NoFeasibleScenario,
    Scenario,
    rank,
    run_adaptive,
    run_fixed,
    summarize,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_STARVED = 4


def parse_scenario(text: str, cfg: ProjectConfig) -> Scenario:
    try:
        n_large, n_small = (int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"--scenario: expected L,S (two integers), got {text!r}") from None
    if n_large < 0 or n_small < 0 or n_large + n_small == 0:
        raise ConfigError(f"--scenario: need at least one truck and no negative counts, got {text!r}")
    (l_lo, l_hi), (s_lo, s_hi) = cfg.grid.large, cfg.grid.small
    sid = 0
    if l_lo <= n_large <= l_hi and s_lo <= n_small <= s_hi:
        sid = (n_small - s_lo) * (l_hi - l_lo + 1) + (n_large - l_lo) + 1
    return Scenario(n_large, n_small, sid)


def _capacities(cfg: ProjectConfig) -> dict:
    return {n: t.capacity for n, t in cfg.trucks.items()}


def _writer(args, cfg: ProjectConfig) -> ReportWriter:
    return ReportWriter(Path(args.out_dir), args.format or cfg.output.format, cfg.output.decimals)


def _charts_on(args, cfg: ProjectConfig) -> bool:
    return cfg.output.charts if args.charts is None else args.charts == "on"


def cmd_simulate(args, cfg: ProjectConfig) -> int:
    scenario = parse_scenario(args.scenario, cfg)
    run = run_fixed(cfg, scenario.fleet, engine=args.engine)
    result = summarize(scenario, run, CostRates.from_config(cfg))
    out = _writer(args, cfg)
    series = out.run_files(run, cfg.output.window)
    out.meta({"config": cfg.name, "run": run_summary(run, result, cfg.output.decimals)})
    if _charts_on(args, cfg):
        from .charts import fleet_chart, utilization_chart

        for name, s in series.items():
            utilization_chart(s, name, out.out_dir / "charts" / f"utilization_{name}.svg")
        fleet_chart(fleet_schedule(run.activity, run.truck_classes, run.makespan),
                    out.out_dir / "charts" / "fleet_schedule.svg")
    _, per_class = run.utilization()
    status = "accepted" if result.accepted else f"rejected ({len(result.violations)} violations)"
    print(f"scenario {scenario.label}: makespan {run.makespan:.2f} min, {status}")
    for name in sorted(per_class):
        print(f"  {name}: mean utilization {100 * per_class[name]:.2f}% "
              f"(windowed {100 * time_weighted_mean(series[name]):.2f}%)")
    return EXIT_OK


def _run_sweep(args, cfg: ProjectConfig):
    results = sweep(cfg, workers=args.workers, engine=args.engine)
    try:
        ranked = rank(results, cfg.grid.objective, _capacities(cfg))
        err = None
    except NoFeasibleScenario as e:
        ranked, err = [], e
    return results, ranked, err


def cmd_sweep(args, cfg: ProjectConfig) -> int:
    results, ranked, err = _run_sweep(args, cfg)
    out = _writer(args, cfg)
    rows = scenario_rows(results, ranked, cfg.output.decimals, cfg.grid.objective, _capacities(cfg))
    out.table("scenario_table", rows, TABLE_COLUMNS)
    meta = {
        "config": cfg.name,
        "scenarios": len(results),
        "accepted": [r.scenario.id for r in results if r.accepted],
        "objective": cfg.grid.objective,
        "winner": None,
    }
    if ranked:
        w = ranked[0].scenario
        meta["winner"] = {"id": w.id, "n_large": w.n_large, "n_small": w.n_small}
    out.meta(meta)
    n_acc = len(meta["accepted"])
    print(f"{len(results)} scenarios, {n_acc} accepted")
    if err is not None:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    w = ranked[0]
    print(f"winner: #{w.scenario.id} ({w.scenario.n_large} large, {w.scenario.n_small} small), "
          f"makespan {fmt(w.makespan, 2)} min")
    return EXIT_OK


def cmd_adapt(args, cfg: ProjectConfig) -> int:
    if args.scenario:
        scenario = parse_scenario(args.scenario, cfg)
    else:
        _, ranked, err = _run_sweep(args, cfg)
        if err is not None:
            print(f"error: cannot seed the controller: {err}", file=sys.stderr)
            return EXIT_INFEASIBLE
        scenario = ranked[0].scenario
    policy = cfg.control_policy()
    if args.hysteresis is not None:
        band = math.inf if args.hysteresis.lower() in ("inf", "infinity", "none") else float(args.hysteresis)
        policy = replace(policy, hysteresis_band=band)
    rates = CostRates.from_config(cfg)
    run, ctl = run_adaptive(cfg, scenario.fleet, policy)
    result = summarize(scenario, run, rates, adaptive=True)
    base = run_fixed(cfg, scenario.fleet, engine=args.engine)
    base_result = summarize(scenario, base, rates)

    out = _writer(args, cfg)
    sched = fleet_schedule(run.activity, run.truck_classes, run.makespan)
    series = out.run_files(run, cfg.output.window, sched)
    d = cfg.output.decimals
    out.meta({"config": cfg.name, "run": run_summary(run, result, d)})
    reviews = [
        {k: (fmt(v, d) if isinstance(v, float) else v) for k, v in r.items()}
        for r in ctl.diagnostics
    ]
    cols = ["time", "truck_class", "event", "cycle", "required", "floor", "idle_excess",
            "effective", "target", "action", "count", "truck"]
    out.table("controller_reviews", reviews, cols)
    compare = {
        "fixed": run_summary(base, base_result, d),
        "adaptive": run_summary(run, result, d),
        "policy": {
            "review_interval": policy.review_interval,
            "hysteresis_band": None if math.isinf(policy.hysteresis_band) else policy.hysteresis_band,
            "mobilization_delay": policy.mobilization_delay,
            "small_fleet_controlled": policy.small_fleet_controlled,
        },
    }
    out.json_file("adaptive_comparison.json", compare)
    if _charts_on(args, cfg):
        from .charts import fleet_chart, utilization_chart

        for name, s in series.items():
            utilization_chart(s, name, out.out_dir / "charts" / f"utilization_{name}.svg",
                              baseline=utilization_series(base, name, cfg.output.window))
        fleet_chart(sched, out.out_dir / "charts" / "fleet_schedule.svg")

    _, u_a = run.utilization()
    _, u_f = base.utilization()
    print(f"adaptive run seeded with {scenario.label}: makespan {run.makespan:.2f} min "
          f"(fixed {base.makespan:.2f}), {len(run.violations)} violations")
    for name in sorted(u_a):
        print(f"  {name}: utilization {100 * u_f[name]:.2f}% -> {100 * u_a[name]:.2f}%")
    print(f"  truck-hours {_hours(base_result):.1f} -> {_hours(result):.1f}")
    return EXIT_OK


def _hours(r) -> float:
    return math.fsum(r.truck_hours.values())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="case-study.config",
                        help="JSON config path (default: the bundled case study)")
    common.add_argument("--out-dir", default="out", help="directory for report files")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--charts", choices=("on", "off"), default=None)
    common.add_argument("--engine", choices=("fast", "reference"), default="fast",
                        help="fixed-fleet engine; both give identical results")

    p = argparse.ArgumentParser(prog="rccsim", description="Truck supply to a concrete paver on a linear project.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="one fixed-fleet run")
    s.add_argument("--scenario", required=True, metavar="L,S")
    s.set_defaults(func=cmd_simulate)
    w = sub.add_parser("sweep", parents=[common], help="evaluate and rank the scenario grid")
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    a = sub.add_parser("adapt", parents=[common], help="adaptive-fleet run")
    a.add_argument("--scenario", metavar="L,S", default=None,
                   help="seed fleet (default: the sweep winner)")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--hysteresis", default=None, help="override the hysteresis band; 'inf' disables control")
    a.set_defaults(func=cmd_adapt)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        # domain invariants checked outside pydantic (e.g. hopper too small for a class)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StarvedModelError as e:
        print(f"starved model: {e}", file=sys.stderr)
        return EXIT_STARVED


if __name__ == "__main__":
    sys.exit(main())
