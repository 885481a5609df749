"""Charging stations and the event-driven UAV charge-cycle simulation.

EE stations are grid powered, shared, and serve arrivals first-come
first-served on ``n_chargers`` identical chargers. RE stations have a single
slot, finite storage and a half-sine daytime harvest; a UAV they cannot top
up in full flies on to its EE fallback.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .energy import J_PER_WH, UavEnergyParams, UnreachableStationError
from .spatial import GroundPoint

STORAGE_TOL_WH = 1e-9
CSV_HEADER = ("uav_id", "arrival_s", "wait_s", "charge_start_s", "charge_end_s", "station_id", "diverted")


@dataclass
class EeStation:
    location: GroundPoint
    n_chargers: int = 1
    charge_time_s: float = 3600.0
    free_at: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.n_chargers < 1:
            raise ValueError("an EE station needs at least one charger")
        if self.charge_time_s < 0:
            raise ValueError("charge time must be non-negative")
        self.reset()

    def reset(self):
        self.free_at = [0.0] * self.n_chargers


def ee_enqueue(station: EeStation, uav_id: int, arrival_time: float) -> tuple[float, float]:
    """Book the earliest-free charger for an arrival.

    Calls must come in arrival order; that is what makes the queue FCFS.
    Returns ``(charge_start, wait)``.
    """
    earliest = heapq.heappop(station.free_at)
    start = max(earliest, arrival_time)
    heapq.heappush(station.free_at, start + station.charge_time_s)
    return start, start - arrival_time


@dataclass(frozen=True)
class HarvestProfile:
    """Half-sine harvest: ``peak * sin(pi * tau / day_length)`` during the day, zero at night.

    ``tau = t mod period`` and ``t = 0`` is sunrise.
    """

    peak_harvest_w: float = 400.0
    day_length_s: float = 43200.0
    period_s: float = 86400.0

    def __post_init__(self):
        if self.peak_harvest_w < 0:
            raise ValueError("peak harvest must be non-negative")
        if not 0 <= self.day_length_s <= self.period_s or self.period_s <= 0:
            raise ValueError("need 0 <= day_length <= period and period > 0")

    def rate_w(self, t: float) -> float:
        tau = t % self.period_s
        if tau >= self.day_length_s or self.day_length_s == 0:
            return 0.0
        return self.peak_harvest_w * math.sin(math.pi * tau / self.day_length_s)

    @property
    def daily_energy_j(self) -> float:
        return 2.0 * self.peak_harvest_w * self.day_length_s / math.pi

    def _cumulative_j(self, t: float) -> float:
        n, tau = divmod(t, self.period_s)
        day = self.day_length_s
        partial = 0.0
        if day > 0:
            partial = self.peak_harvest_w * day / math.pi * (1.0 - math.cos(math.pi * min(tau, day) / day))
        return n * self.daily_energy_j + partial

    def energy_j(self, t0: float, t1: float) -> float:
        """Energy harvested over ``[t0, t1]``."""
        return max(0.0, self._cumulative_j(t1) - self._cumulative_j(t0))


@dataclass
class ReStation:
    location: GroundPoint
    storage_capacity_wh: float
    stored_wh: float
    charge_time_s: float = 3600.0
    harvest: HarvestProfile = field(default_factory=HarvestProfile)
    clock_s: float = 0.0

    def __post_init__(self):
        if self.storage_capacity_wh < 0:
            raise ValueError("storage capacity must be non-negative")
        if not 0 <= self.stored_wh <= self.storage_capacity_wh:
            raise ValueError("stored energy must lie in [0, capacity]")


def harvest_step(re: ReStation, t: float, dt: float) -> float:
    """Add the energy harvested over ``[t, t + dt]``, clamped at capacity."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    gained = re.harvest.energy_j(t, t + dt) / J_PER_WH
    # harvest is never negative, so clamping once at the end equals continuous clamping
    re.stored_wh = min(re.storage_capacity_wh, re.stored_wh + gained)
    re.clock_s = t + dt
    return re.stored_wh


def harvest_until(re: ReStation, t: float) -> float:
    if t > re.clock_s:
        harvest_step(re, re.clock_s, t - re.clock_s)
    return re.stored_wh


def re_serve_recharge(re: ReStation, demand_wh: float) -> bool:
    """All-or-nothing top-up; a refused UAV leaves the storage untouched."""
    if not demand_wh > 0:
        raise ValueError("demand must be positive")
    # tolerance absorbs roundoff from repeated deductions of the same demand
    if re.stored_wh >= demand_wh - STORAGE_TOL_WH:
        re.stored_wh = max(0.0, re.stored_wh - demand_wh)
        return True
    return False


@dataclass(frozen=True)
class ChargeEvent:
    uav_id: int
    arrival_s: float
    wait_s: float
    charge_start_s: float
    charge_end_s: float
    station_id: str
    diverted: bool


@dataclass
class ChargeEventLog:
    events: list[ChargeEvent] = field(default_factory=list)

    def append(self, event: ChargeEvent):
        self.events.append(event)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def for_uav(self, uav_id: int) -> list[ChargeEvent]:
        return [e for e in self.events if e.uav_id == uav_id]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for e in sorted(self.events, key=lambda e: (e.uav_id, e.arrival_s)):
                writer.writerow([e.uav_id, repr(e.arrival_s), repr(e.wait_s), repr(e.charge_start_s),
                                 repr(e.charge_end_s), e.station_id, int(e.diverted)])


@dataclass(frozen=True)
class UavPlan:
    """Hover point and station assignment of one UAV."""

    hover: GroundPoint
    ee_station: int
    re_station: int | None = None


def simulate_uav_cycles(uavs: Sequence[UavPlan], ee_stations: Sequence[EeStation],
                        re_stations: Sequence[ReStation], params: UavEnergyParams,
                        horizon_s: float, record: bool = True) -> tuple[np.ndarray, ChargeEventLog]:
    """Event-driven serve -> travel -> (RE attempt) -> queue/charge -> return.

    Every UAV starts at its hover point with a full battery at ``t = 0``. When
    it has an RE station it keeps enough energy to reach the RE station and
    then its EE fallback, since it only learns the storage level on arrival.
    Station state is mutated in place. Returns per-UAV availability over
    ``[0, horizon_s]`` and the charge log (empty unless ``record``).
    """
    if not horizon_s > 0:
        raise ValueError("horizon must be positive")
    re_owner = [u.re_station for u in uavs if u.re_station is not None]
    if len(set(re_owner)) != len(re_owner):
        raise ValueError("an RE station has a single slot and serves one UAV")
    for st in ee_stations:
        st.reset()

    v = params.speed_mps
    p_m, p_s = params.power_travel_w, params.power_service_w
    full = params.battery_j
    floor = params.battery_j * params.safety_margin
    log = ChargeEventLog()
    on_station = np.zeros(len(uavs))

    legs = []
    for uid, u in enumerate(uavs):
        if not 0 <= u.ee_station < len(ee_stations):
            raise ValueError(f"UAV {uid} has no EE fallback station")
        ee_loc = ee_stations[u.ee_station].location
        if u.re_station is None:
            d_hr = d_re = 0.0
            d_he = u.hover.distance_to(ee_loc)
            reserve = p_m * d_he / v
        else:
            re_loc = re_stations[u.re_station].location
            d_hr = u.hover.distance_to(re_loc)
            d_re = GroundPoint(*re_loc).distance_to(ee_loc)
            d_he = u.hover.distance_to(ee_loc)
            reserve = p_m * (d_hr + d_re) / v
        worst_return = max(d_he, d_hr if u.re_station is not None else 0.0)
        if floor + reserve + p_m * worst_return / v >= full:
            raise UnreachableStationError(f"UAV {uid} cannot reach its EE fallback station")
        legs.append((d_hr, d_re, d_he, reserve))

    def fly_until_ee(uid: int, t: float, energy: float):
        """Advance one UAV locally until it needs the EE station; None past the horizon."""
        u = uavs[uid]
        d_hr, d_re, d_he, reserve = legs[uid]
        re = re_stations[u.re_station] if u.re_station is not None else None
        while True:
            t_serve = (energy - floor - reserve) / p_s
            t_dep = t + t_serve
            on_station[uid] += max(0.0, min(t_dep, horizon_s) - min(t, horizon_s))
            if t_dep >= horizon_s:
                return None
            if re is None:
                return t_dep + d_he / v, False
            t_arr = t_dep + d_hr / v
            if t_arr >= horizon_s:
                return None
            harvest_until(re, t_arr)
            demand_wh = (full - floor - p_m * d_re / v) / J_PER_WH
            if demand_wh > 0 and re_serve_recharge(re, demand_wh):
                t_end = t_arr + re.charge_time_s
                if record:
                    log.append(ChargeEvent(uid, t_arr, 0.0, t_arr, t_end, f"re{u.re_station}", False))
                t, energy = t_end + d_hr / v, full - p_m * d_hr / v
                continue
            return t_arr + d_re / v, True

    pending = []
    for uid in range(len(uavs)):
        nxt = fly_until_ee(uid, 0.0, full)
        if nxt is not None:
            heapq.heappush(pending, (nxt[0], uid, nxt[1]))

    while pending:
        t_arr, uid, diverted = heapq.heappop(pending)
        if t_arr >= horizon_s:
            continue
        station = ee_stations[uavs[uid].ee_station]
        start, wait = ee_enqueue(station, uid, t_arr)
        end = start + station.charge_time_s
        if record:
            log.append(ChargeEvent(uid, t_arr, wait, start, end, f"ee{uavs[uid].ee_station}", diverted))
        d_he = legs[uid][2]
        nxt = fly_until_ee(uid, end + d_he / v, full - p_m * d_he / v)
        if nxt is not None:
            heapq.heappush(pending, (nxt[0], uid, nxt[1]))

    return on_station / horizon_s, log


def shared_charger_availability(t_serve, t_travel, charge_time_s: float, n_chargers: int = 1) -> np.ndarray:
    """Long-run availability of UAVs sharing one FCFS station, fluid approximation.

    Each UAV's natural cycle ``C_i = serve + travel + charge`` is stretched to a
    common floor ``L`` chosen so the chargers' throughput ``n / T_ch`` matches
    ``sum_i 1 / max(C_i, L)``; below saturation ``L = 0`` and nobody waits.
    UAVs with non-positive service time never fly and get availability 0.
    """
    t_serve = np.asarray(t_serve, dtype=float)
    t_travel = np.asarray(t_travel, dtype=float)
    feasible = t_serve > 0
    out = np.zeros_like(t_serve)
    if not feasible.any():
        return out
    cyc = t_serve[feasible] + t_travel[feasible] + charge_time_s
    floor_len = 0.0
    if charge_time_s > 0:
        mu = n_chargers / charge_time_s
        if np.sum(1.0 / cyc) > mu:
            floor_len = _saturation_floor(np.sort(cyc), mu)
    out[feasible] = t_serve[feasible] / np.maximum(cyc, floor_len)
    return out


def _saturation_floor(sorted_cycles: np.ndarray, mu: float) -> float:
    n = len(sorted_cycles)
    inv = 1.0 / sorted_cycles
    tail = np.concatenate((np.cumsum(inv[::-1])[::-1], [0.0]))  # tail[k] = sum_{i >= k}
    for k in range(1, n + 1):
        denom = mu - tail[k]
        if denom <= 0:
            continue
        length = k / denom
        upper = sorted_cycles[k] if k < n else math.inf
        if sorted_cycles[k - 1] <= length <= upper:
            return length
    return n / mu

