"""Hybrid discrete-event simulation of concrete supply to a paver on a linear project."""

from .adaptive import ControlPolicy, FleetController, FleetSchedule, fleet_schedule, required_fleet
from .config import ConfigError, ProjectConfig, case_study, load_config
from .geometry import RoadSpec, SpeedSpec, front_position, haul_distance, travel_time
from .kernel import ContinuousLevel, Kernel, StarvedModelError, time_to_cross, update_rate
from .process import (
    LARGE,
    SMALL,
    ConstraintSpec,
    DispatchSpec,
    PaverSpec,
    RunResult,
    SupplyModel,
    TruckClass,
    Violation,
    check_freshness,
    check_interarrival,
    utilization,
)
from .scenarios import CostRates, Scenario, ScenarioResult, cost, enumerate_grid, evaluate, rank, sweep

__version__ = "0.1.0"

__all__ = [
    "ControlPolicy",
    "FleetController",
    "FleetSchedule",
    "fleet_schedule",
    "required_fleet",
    "ConfigError",
    "ProjectConfig",
    "case_study",
    "load_config",
    "RoadSpec",
    "SpeedSpec",
    "front_position",
    "haul_distance",
    "travel_time",
    "ContinuousLevel",
    "Kernel",
    "StarvedModelError",
    "time_to_cross",
    "update_rate",
    "LARGE",
    "SMALL",
    "ConstraintSpec",
    "DispatchSpec",
    "PaverSpec",
    "RunResult",
    "SupplyModel",
    "TruckClass",
    "Violation",
    "check_freshness",
    "check_interarrival",
    "utilization",
    "CostRates",
    "Scenario",
    "ScenarioResult",
    "cost",
    "enumerate_grid",
    "evaluate",
    "rank",
    "sweep",
]
