"""Project configuration: a JSON document validated with pydantic."""

from __future__ import annotations

import json
import math
import warnings
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .adaptive import ControlPolicy
from .geometry import RoadSpec, SpeedSpec
from .process import ConstraintSpec, DispatchSpec, PaverSpec, TruckClass

DEFAULT_THICKNESS = 0.2
CASE_STUDY = "case-study.config"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RoadModel(_Strict):
    length: float = Field(gt=0)
    width: float = Field(gt=0)
    thickness: float = Field(gt=0)
    plant_chainage: float = Field(ge=0)

    @model_validator(mode="before")
    @classmethod
    def _default_thickness(cls, data):
        if isinstance(data, dict) and data.get("thickness") is None:
            warnings.warn(f"road.thickness missing; using {DEFAULT_THICKNESS} m", UserWarning, stacklevel=2)
            data = {**data, "thickness": DEFAULT_THICKNESS}
        return data

    @model_validator(mode="after")
    def _chainage_on_road(self):
        if self.plant_chainage > self.length:
            raise ValueError(f"plant_chainage {self.plant_chainage} is beyond the road end {self.length}")
        return self


class SpeedModel(_Strict):
    loaded_speed: float = Field(gt=0)
    empty_speed: float = Field(gt=0)

    @model_validator(mode="after")
    def _order(self):
        if self.empty_speed < self.loaded_speed:
            raise ValueError("empty_speed must be >= loaded_speed")
        return self


class TruckClassModel(_Strict):
    capacity: float = Field(gt=0)
    load_duration: float = Field(gt=0)
    dump_duration: float = Field(gt=0)


class PaverModel(_Strict):
    placement_rate: float = Field(default=1.0, gt=0)
    hopper_capacity: float = Field(default=7.5, gt=0)


class ConstraintModel(_Strict):
    freshness_limit: float = Field(default=45.0, ge=0)
    interarrival_limit: float = Field(default=3.0, ge=0)
    compaction_lag: float = Field(default=0.0, ge=0)


class DispatchModel(_Strict):
    arrival_margin: float = Field(default=1.5, ge=0)
    priority: Optional[list[str]] = None


class GridModel(_Strict):
    large: tuple[int, int] = (1, 10)
    small: tuple[int, int] = (1, 5)
    objective: Literal["mean", "capacity-weighted"] = "mean"

    @model_validator(mode="after")
    def _bounds(self):
        for name in ("large", "small"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} range {lo}..{hi} is empty or negative")
        return self


class ControlModel(_Strict):
    review_interval: float = Field(default=60.0, gt=0)
    # null means an infinite band (controller neutralized)
    hysteresis_band: Optional[float] = Field(default=1.0, ge=0)
    min_active: dict[str, int] = Field(default_factory=lambda: {"large": 1})
    max_active: Optional[dict[str, int]] = None
    mobilization_delay: float = Field(default=0.0, ge=0)
    small_fleet_controlled: bool = False

    @model_validator(mode="after")
    def _min_max(self):
        for name, lo in self.min_active.items():
            if lo < 0:
                raise ValueError(f"min_active.{name} must be >= 0")
            hi = (self.max_active or {}).get(name)
            if hi is not None and hi < lo:
                raise ValueError(f"max_active.{name} is below min_active.{name}")
        return self


class CostModel(_Strict):
    truck_hourly: dict[str, float] = Field(default_factory=lambda: {"large": 95.0, "small": 70.0})
    plant_hourly: float = Field(default=250.0, ge=0)
    paver_hourly: float = Field(default=180.0, ge=0)
    mobilization: float = Field(default=150.0, ge=0)

    @model_validator(mode="after")
    def _non_negative(self):
        for name, v in self.truck_hourly.items():
            if v < 0:
                raise ValueError(f"truck_hourly.{name} must be >= 0")
        return self


class OutputModel(_Strict):
    window: float = Field(default=60.0, gt=0)
    decimals: int = Field(default=4, ge=0, le=12)
    format: Literal["csv", "json"] = "csv"
    charts: bool = True


class ProjectConfig(_Strict):
    name: str = "project"
    road: RoadModel
    speeds: SpeedModel
    trucks: dict[str, TruckClassModel]
    paver: PaverModel = PaverModel()
    constraints: ConstraintModel = ConstraintModel()
    dispatch: DispatchModel = DispatchModel()
    grid: GridModel = GridModel()
    control: ControlModel = ControlModel()
    costs: CostModel = CostModel()
    output: OutputModel = OutputModel()
    notes: dict[str, Union[str, float, int, list, dict, None]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _cross_checks(self):
        if not self.trucks:
            raise ValueError("trucks: at least one truck class is required")
        for name, t in self.trucks.items():
            if t.capacity > self.paver.hopper_capacity:
                raise ValueError(
                    f"trucks.{name}.capacity {t.capacity} exceeds paver.hopper_capacity "
                    f"{self.paver.hopper_capacity}"
                )
        for name in self.dispatch.priority or []:
            if name not in self.trucks:
                raise ValueError(f"dispatch.priority names unknown truck class {name!r}")
        return self

    # -- domain objects -----------------------------------------------------

    def road_spec(self) -> RoadSpec:
        r = self.road
        return RoadSpec(r.length, r.width, r.thickness, r.plant_chainage)

    def speed_spec(self) -> SpeedSpec:
        return SpeedSpec(self.speeds.loaded_speed, self.speeds.empty_speed)

    def truck_classes(self) -> dict[str, TruckClass]:
        return {n: TruckClass(n, t.capacity, t.load_duration, t.dump_duration)
                for n, t in self.trucks.items()}

    def paver_spec(self) -> PaverSpec:
        return PaverSpec(self.paver.placement_rate, self.paver.hopper_capacity)

    def constraint_spec(self) -> ConstraintSpec:
        c = self.constraints
        return ConstraintSpec(c.freshness_limit, c.interarrival_limit, c.compaction_lag)

    def dispatch_spec(self) -> DispatchSpec:
        d = self.dispatch
        return DispatchSpec(d.arrival_margin, tuple(d.priority) if d.priority is not None else None)

    def control_policy(self) -> ControlPolicy:
        c = self.control
        band = math.inf if c.hysteresis_band is None else c.hysteresis_band
        return ControlPolicy(
            review_interval=c.review_interval,
            hysteresis_band=band,
            min_active=dict(c.min_active),
            max_active=dict(c.max_active) if c.max_active is not None else None,
            mobilization_delay=c.mobilization_delay,
            small_fleet_controlled=c.small_fleet_controlled,
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2) + "\n"


def _field_message(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        lines.append(f"{loc}: {msg}")
    return "; ".join(lines)


def parse_config(data: dict) -> ProjectConfig:
    try:
        return ProjectConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_field_message(e)) from None


def load_config(path: Union[str, Path]) -> ProjectConfig:
    """Read and validate a JSON config file.

    The name ``case-study.config`` resolves to the bundled case study when no
    such file exists on disk.
    """
    p = Path(path)
    if not p.exists() and p.name == CASE_STUDY and str(path) == CASE_STUDY:
        text = resources.files("rccsim").joinpath("data").joinpath(CASE_STUDY).read_text()
    else:
        try:
            text = p.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(data)


def case_study() -> ProjectConfig:
    return load_config(CASE_STUDY)
