"""Linear-project geometry: paving front, haul distance and travel time."""

from __future__ import annotations

from dataclasses import dataclass

VOLUME_TOLERANCE = 1e-6


@dataclass(frozen=True)
class RoadSpec:
    """Road dimensions in meters; ``plant_chainage`` is measured from the start point."""

    length: float
    width: float
    thickness: float
    plant_chainage: float

    def __post_init__(self) -> None:
        for name in ("length", "width", "thickness"):
            if not getattr(self, name) > 0:
                raise ValueError(f"road.{name} must be > 0, got {getattr(self, name)!r}")
        if not 0 <= self.plant_chainage <= self.length:
            raise ValueError(
                f"road.plant_chainage must lie in [0, {self.length}], got {self.plant_chainage!r}"
            )

    @property
    def cross_section(self) -> float:
        return self.width * self.thickness

    @property
    def total_volume(self) -> float:
        return self.length * self.width * self.thickness


@dataclass(frozen=True)
class SpeedSpec:
    """Haul speeds in km/h."""

    loaded_speed: float
    empty_speed: float

    def __post_init__(self) -> None:
        if not (self.loaded_speed > 0 and self.empty_speed > 0):
            raise ValueError("speeds must be > 0")
        if self.empty_speed < self.loaded_speed:
            raise ValueError(
                f"speeds.empty_speed ({self.empty_speed}) must be >= loaded_speed ({self.loaded_speed})"
            )


def front_position(volume_placed: float, road: RoadSpec) -> float:
    if volume_placed < 0 or volume_placed > road.total_volume + VOLUME_TOLERANCE:
        raise ValueError(
            f"placed volume {volume_placed!r} outside [0, {road.total_volume}]"
        )
    if volume_placed >= road.total_volume:
        return road.length
    chainage = volume_placed / road.cross_section
    return min(chainage, road.length)


def haul_distance(front: float, road: RoadSpec) -> float:
    return abs(front - road.plant_chainage)


def travel_time(distance: float, speed: float) -> float:
    """Minutes needed to cover ``distance`` meters at ``speed`` km/h."""
    if distance < 0 or speed <= 0:
        raise ValueError("distance must be >= 0 and speed > 0")
    return distance / 1000.0 / speed * 60.0
