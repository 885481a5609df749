"""UAV battery bookkeeping for the serve / travel / wait / charge renewal cycle."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

J_PER_WH = 3600.0
MIN_POWER_W = 1e-3


class UnreachableStationError(ValueError):
    """The round trip to a charging station needs more energy than the battery holds."""


@dataclass(frozen=True)
class UavEnergyParams:
    battery_wh: float = 177.6
    power_service_w: float = 177.5
    power_travel_w: float = 161.8
    speed_mps: float = 10.0
    altitude_m: float = 60.0
    safety_margin: float = 0.0  # fraction of the battery never used

    def __post_init__(self):
        for name in ("battery_wh", "power_service_w", "power_travel_w", "speed_mps", "altitude_m"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not 0 <= self.safety_margin < 1:
            raise ValueError("safety_margin must lie in [0, 1)")

    @property
    def battery_j(self) -> float:
        return self.battery_wh * J_PER_WH

    @property
    def usable_j(self) -> float:
        return self.battery_j * (1.0 - self.safety_margin)


@dataclass(frozen=True)
class FlightCycle:
    t_serve: float
    t_travel: float = 0.0
    t_wait: float = 0.0
    t_charge: float = 0.0

    def __post_init__(self):
        if min(self.t_serve, self.t_travel, self.t_wait, self.t_charge) < 0:
            raise ValueError("cycle durations must be non-negative")

    @property
    def total(self) -> float:
        return self.t_serve + self.t_travel + self.t_wait + self.t_charge


@dataclass(frozen=True)
class SolarUavParams:
    """Onboard panel: harvested power versus the extra weight it adds.

    The defaults are illustrative, not published values.
    """

    harvest_w: float = 20.0
    weight_penalty: float = 1.15

    def __post_init__(self):
        if self.harvest_w < 0:
            raise ValueError("harvest_w must be >= 0")
        if self.weight_penalty < 1:
            raise ValueError("weight_penalty must be >= 1")


def travel_leg(dist_m: float, params: UavEnergyParams) -> tuple[float, float]:
    """Time (s) and energy (J) to fly ``dist_m`` at cruise speed."""
    if dist_m < 0:
        raise ValueError("distance must be non-negative")
    t = dist_m / params.speed_mps
    return t, params.power_travel_w * t


def service_time_for_reserve(params: UavEnergyParams, travel_energy_j):
    """Hover time left after setting aside ``travel_energy_j`` from a full battery.

    Vectorised; negative results mean the geometry is infeasible.
    """
    return (params.usable_j - np.asarray(travel_energy_j, dtype=float)) / params.power_service_w


def sortie_service_time(params: UavEnergyParams, round_trip_dist_m: float) -> float:
    _, e_travel = travel_leg(round_trip_dist_m, params)
    if e_travel >= params.usable_j:
        raise UnreachableStationError(
            f"round trip of {round_trip_dist_m:.1f} m needs {e_travel:.0f} J, "
            f"battery holds {params.usable_j:.0f} J")
    return float(service_time_for_reserve(params, e_travel))


def station_cycle(params: UavEnergyParams, station_dist_m: float, charge_time_s: float,
                  wait_s: float = 0.0) -> FlightCycle:
    """Renewal cycle for a UAV commuting between its hover point and one station."""
    t_travel, _ = travel_leg(2.0 * station_dist_m, params)
    return FlightCycle(sortie_service_time(params, 2.0 * station_dist_m), t_travel, wait_s, charge_time_s)


def availability(cycle: FlightCycle) -> float:
    """Long-run fraction of time on station."""
    if not cycle.total > 0:
        raise ValueError("cycle has zero total duration")
    return cycle.t_serve / cycle.total


def dedicated_station_availability(params: UavEnergyParams, station_dist_m, charge_time_s):
    """Vectorised availability for UAVs with an uncontended station.

    UAVs that cannot reach their station get availability 0.
    """
    d = np.asarray(station_dist_m, dtype=float)
    t_travel = 2.0 * d / params.speed_mps
    t_serve = service_time_for_reserve(params, params.power_travel_w * t_travel)
    total = t_serve + t_travel + charge_time_s
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(t_serve > 0, t_serve / total, 0.0)
    return a


def solar_uav_net_powers(base: UavEnergyParams, solar: SolarUavParams) -> UavEnergyParams:
    """Net service and travel powers of a UAV carrying a solar panel."""
    p_s = solar.weight_penalty * base.power_service_w - solar.harvest_w
    p_m = solar.weight_penalty * base.power_travel_w - solar.harvest_w
    if p_s <= 0:
        raise ValueError("harvest exceeds hovering consumption; perpetual flight is not modelled")
    return replace(base, power_service_w=p_s, power_travel_w=max(p_m, MIN_POWER_W))
