"""End-to-end experiments: geometry, station deployment, availability, coverage.

Every trial draws one geometry and one reference user, then evaluates all
deployment modes (and sweep values that do not change the geometry) on that
same draw. A UAV is switched on with probability equal to its long-run
availability, using one uniform per UAV shared by every mode, so the modes
are compared on common random numbers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np
from scipy.special import gammaincc

from .channel import ChannelParams, coverage_batch, los_probability, mean_power, sample_link_snapshot
from .energy import (SolarUavParams, UavEnergyParams, dedicated_station_availability,
                     service_time_for_reserve, solar_uav_net_powers)
from .montecarlo import SweepResult, geometry_bytes, run_batch, sweep, trial_rng
from .spatial import (ClusterSpec, GroundPoint, NoRoadError, ProcessDensities, RoadLine, SimWindow,
                      nearest_point_on_roads, nearest_points_on_lines, roads_to_arrays, sample_plp,
                      sample_ppp)
from .stations import EeStation, HarvestProfile, ReStation, UavPlan, shared_charger_availability, simulate_uav_cycles

PLACEMENT_STREAM = 1
B_MAX_MULTIPLES = (0, 1, 2, 4, 8)


class DeploymentMode(str, enum.Enum):
    EE_CENTRAL_ONLY = "EE_CENTRAL_ONLY"
    EE_PER_CLUSTER_EDGE = "EE_PER_CLUSTER_EDGE"
    RE_AT_CENTER = "RE_AT_CENTER"
    RE_UAV = "RE_UAV"
    RE_ON_ROAD = "RE_ON_ROAD"

    def __str__(self):
        return self.value


SCENARIO1_MODES = (DeploymentMode.EE_CENTRAL_ONLY, DeploymentMode.EE_PER_CLUSTER_EDGE,
                   DeploymentMode.RE_AT_CENTER, DeploymentMode.RE_UAV)
SCENARIO3_MODES = (DeploymentMode.EE_PER_CLUSTER_EDGE, DeploymentMode.RE_ON_ROAD)


@dataclass(frozen=True)
class Scenario1Config:
    densities: ProcessDensities = ProcessDensities()
    window: SimWindow = SimWindow()
    channel: ChannelParams = ChannelParams()
    energy: UavEnergyParams = UavEnergyParams()
    solar: SolarUavParams = SolarUavParams()
    user_stddev: float = math.sqrt(120.0)
    modes: tuple[DeploymentMode, ...] = SCENARIO1_MODES
    charge_times_s: tuple[float, ...] = (1800.0, 3600.0, 7200.0, 10800.0)
    feasibility_radius_m: float = 500.0
    n_chargers: int = 1
    interference: bool = True
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.charge_times_s:
            raise ValueError("charge time sweep list is empty")
        if any(t < 0 for t in self.charge_times_s):
            raise ValueError("charge times must be non-negative")
        if not self.modes:
            raise ValueError("no deployment mode selected")
        if not self.user_stddev > 0 or not self.feasibility_radius_m > 0 or self.n_chargers < 1:
            raise ValueError("user_stddev, feasibility radius and charger count must be positive")


@dataclass(frozen=True)
class Scenario2Config(Scenario1Config):
    modes: tuple[DeploymentMode, ...] = (DeploymentMode.RE_AT_CENTER, DeploymentMode.EE_CENTRAL_ONLY)
    charge_times_s: tuple[float, ...] = (3600.0,)
    capacities_wh: tuple[float, ...] = tuple(k * 177.6 for k in B_MAX_MULTIPLES)
    harvest: HarvestProfile = HarvestProfile()
    horizon_periods: float = 1.0
    initial_stored_fraction: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.capacities_wh or any(c < 0 for c in self.capacities_wh):
            raise ValueError("capacities must be a non-empty list of values >= 0")
        if self.horizon_periods < 1:
            raise ValueError("horizon must cover at least one day/night period")
        if not 0 <= self.initial_stored_fraction <= 1:
            raise ValueError("initial_stored_fraction must lie in [0, 1]")

    @property
    def horizon_s(self) -> float:
        return self.horizon_periods * self.harvest.period_s


@dataclass(frozen=True)
class Scenario3Config:
    densities: ProcessDensities = ProcessDensities()
    window: SimWindow = SimWindow()
    channel: ChannelParams = ChannelParams()
    energy: UavEnergyParams = UavEnergyParams()
    user_stddev: float = math.sqrt(120.0)
    modes: tuple[DeploymentMode, ...] = SCENARIO3_MODES
    distances_m: tuple[float, ...] = (500.0, 1000.0, 2000.0, 4000.0)
    feasibility_radii_m: tuple[float, ...] = (500.0, 1000.0)
    charge_time_s: float = 3600.0
    living_zone_sigmas: float = 3.0
    placement_samples: int = 20000
    interference: bool = True
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.distances_m or any(d < 0 for d in self.distances_m):
            raise ValueError("pair distances must be a non-empty list of values >= 0")
        if not self.feasibility_radii_m or any(r <= 0 for r in self.feasibility_radii_m):
            raise ValueError("feasibility radii must be positive")
        if not set(self.modes) <= set(SCENARIO3_MODES):
            raise ValueError("scenario 3 supports EE_PER_CLUSTER_EDGE and RE_ON_ROAD only")
        if self.charge_time_s < 0 or self.placement_samples < 1 or not self.user_stddev > 0:
            raise ValueError("invalid charge time, placement sample count or user spread")

    @property
    def living_zone_m(self) -> float:
        return self.living_zone_sigmas * self.user_stddev


@dataclass(frozen=True)
class ClusterPair:
    living: ClusterSpec
    working: ClusterSpec

    @property
    def living_center(self) -> GroundPoint:
        return self.living.center

    @property
    def working_center(self) -> GroundPoint:
        return self.working.center

    @property
    def distance(self) -> float:
        return self.living.center.distance_to(self.working.center)


# Placement ----------------------------------------------------------------

def place_ee_station(uav_point: Sequence[float], living_center: Sequence[float], radius: float) -> GroundPoint:
    """Point of the disk ``(living_center, radius)`` closest to the UAV."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    dx, dy = uav_point[0] - living_center[0], uav_point[1] - living_center[1]
    r = math.hypot(dx, dy)
    if r <= radius:
        return GroundPoint(float(uav_point[0]), float(uav_point[1]))
    return GroundPoint(living_center[0] + dx * radius / r, living_center[1] + dy * radius / r)


def place_re_station(uav_point: Sequence[float], roads: Sequence[RoadLine], living: ClusterSpec,
                     zone_sigmas: float = 3.0) -> GroundPoint:
    """Hover point if it lies over the living cluster, else the nearest road point.

    Raises ``NoRoadError`` when neither is possible.
    """
    if living.center.distance_to(uav_point) <= zone_sigmas * living.user_stddev:
        return GroundPoint(float(uav_point[0]), float(uav_point[1]))
    point, _ = nearest_point_on_roads(uav_point, roads)
    return point


def sample_pair_users(pair: ClusterPair, working_weight: float, n: int, rng: np.random.Generator) -> np.ndarray:
    at_work = rng.random(n) < working_weight
    centers = np.where(at_work[:, None], np.asarray(pair.working_center), np.asarray(pair.living_center))
    stddev = np.where(at_work, pair.working.user_stddev, pair.living.user_stddev)
    return centers + rng.normal(size=(n, 2)) * stddev[:, None]


def pair_coverage_objective(candidates: np.ndarray, users: np.ndarray, channel: ChannelParams,
                            altitude: float, chunk: int = 16) -> np.ndarray:
    """Noise-limited coverage of ``users`` from a UAV at each candidate hover point.

    LoS state and fading are averaged out in closed form (Gamma tail), which
    leaves a smooth function of the hover point for a fixed user sample.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    out = np.empty(len(candidates))
    need = channel.sinr_threshold * channel.noise_power
    for start in range(0, len(candidates), chunk):
        c = candidates[start:start + chunk]
        horiz = np.hypot(users[None, :, 0] - c[:, None, 0], users[None, :, 1] - c[:, None, 1])
        d3 = np.hypot(horiz, altitude)
        p_los = los_probability(np.degrees(np.arctan2(altitude, horiz)), channel)
        s_los = mean_power(d3, True, True, channel)
        s_nlos = mean_power(d3, True, False, channel)
        cov = (p_los * gammaincc(channel.m_los, channel.m_los * need / s_los)
               + (1.0 - p_los) * gammaincc(channel.m_nlos, channel.m_nlos * need / s_nlos))
        out[start:start + chunk] = cov.mean(axis=1)
    return out


def place_uav_optimal(pair: ClusterPair, working_weight: float, channel: ChannelParams, altitude: float,
                      rng: np.random.Generator, n_samples: int = 20000, grid_points: int = 33,
                      tol_m: float = 0.5) -> GroundPoint:
    """Hover point on the living-working segment that maximises pair coverage.

    The objective is evaluated on one fixed user sample (common random
    numbers). A coarse grid picks the best basin, golden-section refines it.
    """
    d = pair.distance
    if d == 0:
        return pair.living_center
    users = sample_pair_users(pair, working_weight, n_samples, rng)
    start = np.asarray(pair.living_center, dtype=float)
    step = np.asarray(pair.working_center, dtype=float) - start

    def objective(ts):
        return pair_coverage_objective(start + np.outer(ts, step), users, channel, altitude)

    grid = np.linspace(0.0, 1.0, grid_points)
    k = int(np.argmax(objective(grid)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    t = golden_section_max(lambda x: float(objective(np.array([x]))[0]), lo, hi, tol_m / d)
    return GroundPoint(*(start + t * step))


def golden_section_max(f, lo: float, hi: float, tol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    e = a + inv_phi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + inv_phi * (b - a)
            fe = f(e)
    candidates = [(f(a), -a), (fc, -c), (fe, -e), (f(b), -b)]
    return -max(candidates)[1]


# Scenario 1 ---------------------------------------------------------------

def _scenario_geometry(cfg, rng: np.random.Generator):
    """Reference cluster (row 0) plus a PPP of other clusters, shifted by ``cfg.origin``."""
    hw = cfg.window.half_width
    ref = rng.uniform(-hw, hw, size=(1, 2))
    others = sample_ppp(cfg.densities.lambda_m, cfg.window, rng)
    origin = np.asarray(cfg.origin, dtype=float)
    return np.vstack((ref, others)) + origin, origin


def scenario1_availability(mode: DeploymentMode, centers: np.ndarray, large_center: np.ndarray,
                           charge_time_s: float, cfg: Scenario1Config) -> np.ndarray:
    """Long-run availability of every cluster UAV under one deployment mode."""
    dist_large = np.hypot(*(centers - large_center).T)
    if mode is DeploymentMode.RE_AT_CENTER:
        return dedicated_station_availability(cfg.energy, np.zeros(len(centers)), charge_time_s)
    if mode is DeploymentMode.EE_PER_CLUSTER_EDGE:
        # one dedicated EE per UAV on the edge of the grid-feasible disk around the large cluster
        return dedicated_station_availability(
            cfg.energy, np.maximum(dist_large - cfg.feasibility_radius_m, 0.0), charge_time_s)
    if mode in (DeploymentMode.EE_CENTRAL_ONLY, DeploymentMode.RE_UAV):
        params = cfg.energy if mode is DeploymentMode.EE_CENTRAL_ONLY else solar_uav_net_powers(cfg.energy, cfg.solar)
        t_travel = 2.0 * dist_large / params.speed_mps
        t_serve = service_time_for_reserve(params, params.power_travel_w * t_travel)
        return shared_charger_availability(t_serve, t_travel, charge_time_s, cfg.n_chargers)
    raise ValueError(f"mode {mode} is not part of scenario 1")


def coverage_with_availability(cfg, centers, user, tbs_xy, avail: np.ndarray, rng: np.random.Generator):
    """Sample links once, switch UAVs on/off with one shared uniform each, evaluate every row."""
    tx_xy = np.vstack((centers, tbs_xy)) if tbs_xy is not None else centers
    heights = np.full(len(tx_xy), cfg.energy.altitude_m)
    if tbs_xy is not None:
        heights[len(centers):] = 0.0
    snap = sample_link_snapshot(user, tx_xy, heights, cfg.channel, rng)
    marks = rng.random(len(centers))
    active = np.ones((avail.shape[0], len(tx_xy)), dtype=bool)
    active[:, :len(centers)] = marks < avail
    return coverage_batch(snap, active, cfg.channel, cfg.interference)


def scenario1_trial(cfg: Scenario1Config, rng: np.random.Generator):
    centers, large = _scenario_geometry(cfg, rng)
    user = centers[0] + rng.normal(0.0, cfg.user_stddev, size=2)
    avail = np.array([scenario1_availability(mode, centers, large, t, cfg)
                      for t in cfg.charge_times_s for mode in cfg.modes])
    outcome = coverage_with_availability(cfg, centers, user, large[None, :], avail, rng)
    return outcome, geometry_bytes(centers, user)


def run_scenario1(cfg: Scenario1Config, n: int, seed: int, workers: int | None = None) -> SweepResult:
    """Coverage per (charge time, deployment mode)."""
    batch = run_batch(partial(scenario1_trial, cfg), n, seed, workers)
    est = batch.estimates()
    result = SweepResult()
    k = 0
    for t in cfg.charge_times_s:
        for mode in cfg.modes:
            result.add(t, str(mode), est[k])
            k += 1
        result.geometry_digests[f"{t:g}"] = batch.geometry_digest
    return result


# Scenario 2 ---------------------------------------------------------------

def scenario2_availability(centers: np.ndarray, large_center: np.ndarray, charge_time_s: float,
                           capacity_wh: float | None, cfg: Scenario2Config) -> np.ndarray:
    """Event-driven availability over the horizon; ``capacity_wh=None`` means no RE stations.

    UAVs that cannot reach the EE station are grounded (availability 0).
    """
    p = cfg.energy
    dist = np.hypot(*(centers - large_center).T)
    feasible = p.battery_j * p.safety_margin + 2.0 * p.power_travel_w * dist / p.speed_mps < p.battery_j
    idx = np.flatnonzero(feasible)
    ee = [EeStation(GroundPoint(*large_center), cfg.n_chargers, charge_time_s)]
    if capacity_wh is None:
        plans = [UavPlan(GroundPoint(*centers[i]), 0) for i in idx]
        res = []
    else:
        stored = capacity_wh if math.isinf(capacity_wh) else cfg.initial_stored_fraction * capacity_wh
        plans = [UavPlan(GroundPoint(*centers[i]), 0, k) for k, i in enumerate(idx)]
        res = [ReStation(GroundPoint(*centers[i]), capacity_wh, stored, charge_time_s, cfg.harvest)
               for i in idx]
    out = np.zeros(len(centers))
    if plans:
        avail, _ = simulate_uav_cycles(plans, ee, res, p, cfg.horizon_s, record=False)
        out[idx] = avail
    return out


def scenario2_trial(cfg: Scenario2Config, rng: np.random.Generator):
    centers, large = _scenario_geometry(cfg, rng)
    user = centers[0] + rng.normal(0.0, cfg.user_stddev, size=2)
    rows = []
    for t in cfg.charge_times_s:
        for mode in cfg.modes:
            if mode is DeploymentMode.EE_CENTRAL_ONLY:
                rows.append(scenario2_availability(centers, large, t, None, cfg))
            elif mode is DeploymentMode.RE_AT_CENTER:
                rows.extend(scenario2_availability(centers, large, t, c, cfg) for c in cfg.capacities_wh)
            else:
                raise ValueError(f"mode {mode} is not part of scenario 2")
    outcome = coverage_with_availability(cfg, centers, user, large[None, :], np.array(rows), rng)
    return outcome, geometry_bytes(centers, user)


def _mode_label(mode, t, many: bool) -> str:
    return f"{mode}@T_ch={t:g}" if many else str(mode)


def run_scenario2(cfg: Scenario2Config, n: int, seed: int, workers: int | None = None) -> SweepResult:
    """Coverage per RE storage capacity; the EE-only reference is repeated on every row."""
    batch = run_batch(partial(scenario2_trial, cfg), n, seed, workers)
    est = iter(batch.estimates())
    many = len(cfg.charge_times_s) > 1
    result = SweepResult()
    per_t = []
    for t in cfg.charge_times_s:
        block = {}
        for mode in cfg.modes:
            if mode is DeploymentMode.EE_CENTRAL_ONLY:
                block[mode] = next(est)
            else:
                block[mode] = [next(est) for _ in cfg.capacities_wh]
        per_t.append((t, block))
    for c_idx, cap in enumerate(cfg.capacities_wh):
        for t, block in per_t:
            for mode in cfg.modes:
                e = block[mode] if mode is DeploymentMode.EE_CENTRAL_ONLY else block[mode][c_idx]
                result.add(cap, _mode_label(mode, t, many), e)
        result.geometry_digests[f"{cap:g}"] = batch.geometry_digest
    return result


# Scenario 3 ---------------------------------------------------------------

def canonical_pair(d: float, user_stddev: float) -> ClusterPair:
    return ClusterPair(ClusterSpec(GroundPoint(0.0, 0.0), user_stddev),
                       ClusterSpec(GroundPoint(float(d), 0.0), user_stddev))


def optimal_fraction(cfg: Scenario3Config, d: float, seed: int) -> float:
    """Optimal hover position as a fraction of the way from living to working center.

    The objective is invariant to rotation and translation of the pair, so one
    canonical placement per distance serves every pair.
    """
    if d == 0:
        return 0.0
    rng = trial_rng(seed, 0, stream=PLACEMENT_STREAM)
    point = place_uav_optimal(canonical_pair(d, cfg.user_stddev), cfg.densities.working_weight,
                              cfg.channel, cfg.energy.altitude_m, rng, cfg.placement_samples)
    return point.x / d


def _ee_labels(cfg: Scenario3Config) -> list[str]:
    base = str(DeploymentMode.EE_PER_CLUSTER_EDGE)
    return [base if i == 0 else f"{base}:R={r:g}" for i, r in enumerate(cfg.feasibility_radii_m)]


def scenario3_labels(cfg: Scenario3Config) -> list[str]:
    labels = []
    for mode in cfg.modes:
        labels.extend(_ee_labels(cfg) if mode is DeploymentMode.EE_PER_CLUSTER_EDGE else [str(mode)])
    return labels


def scenario3_trial(cfg: Scenario3Config, d: float, fraction: float, rng: np.random.Generator):
    """Outcomes per label, plus a final slot flagging an RE-to-EE fallback for the reference pair."""
    living, origin = _scenario_geometry(cfg, rng)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=len(living))
    direction = np.column_stack((np.cos(phi), np.sin(phi)))
    working = living + d * direction
    uav = living + fraction * d * direction

    road_radius = cfg.window.circumradius + max(cfg.distances_m)
    roads = sample_plp(cfg.densities.lambda_roads, road_radius, rng)
    angles, offsets = roads_to_arrays(roads)
    offsets = offsets + origin[0] * np.cos(angles) + origin[1] * np.sin(angles)

    at_work = rng.random() < cfg.densities.working_weight
    user = (working[0] if at_work else living[0]) + rng.normal(0.0, cfg.user_stddev, size=2)

    uav_to_living = np.hypot(*(uav - living).T)
    rows = []
    fallback = False
    for mode in cfg.modes:
        if mode is DeploymentMode.EE_PER_CLUSTER_EDGE:
            for r in cfg.feasibility_radii_m:
                ee_dist = np.maximum(uav_to_living - r, 0.0)
                rows.append(dedicated_station_availability(cfg.energy, ee_dist, cfg.charge_time_s))
        else:
            outside = uav_to_living > cfg.living_zone_m
            re_dist = np.zeros(len(uav))
            if outside.any():
                try:
                    _, road_dist = nearest_points_on_lines(uav[outside], angles, offsets)
                    re_dist[outside] = road_dist
                except NoRoadError:
                    re_dist[outside] = np.maximum(uav_to_living[outside] - cfg.feasibility_radii_m[0], 0.0)
                    fallback = bool(outside[0])
            rows.append(dedicated_station_availability(cfg.energy, re_dist, cfg.charge_time_s))
    outcome = coverage_with_availability(cfg, uav, user, origin[None, :], np.array(rows), rng)
    return np.append(outcome, fallback), geometry_bytes(living, phi, offsets, user)


def scenario3_point(cfg: Scenario3Config, d: float, n: int, seed: int, workers: int | None = None) -> SweepResult:
    fraction = optimal_fraction(cfg, d, seed)
    batch = run_batch(partial(scenario3_trial, cfg, d, fraction), n, seed, workers)
    est = batch.estimates()
    result = SweepResult()
    for label, e in zip(scenario3_labels(cfg), est):
        result.add(d, label, e)
    result.geometry_digests[f"{d:g}"] = batch.geometry_digest
    result.notes[f"re_fallback_trials@d={d:g}"] = int(batch.successes[-1])
    result.notes[f"uav_fraction@d={d:g}"] = fraction
    return result


def run_scenario3(cfg: Scenario3Config, n: int, seed: int, workers: int | None = None) -> SweepResult:
    """Coverage per living-working distance and deployment mode."""
    return sweep(partial(scenario3_point, cfg), cfg.distances_m, n, seed, workers)


def run_scenario(cfg, n: int, seed: int, workers: int | None = None) -> SweepResult:
    if isinstance(cfg, Scenario2Config):
        return run_scenario2(cfg, n, seed, workers)
    if isinstance(cfg, Scenario1Config):
        return run_scenario1(cfg, n, seed, workers)
    if isinstance(cfg, Scenario3Config):
        return run_scenario3(cfg, n, seed, workers)
    raise TypeError(f"unknown scenario config {type(cfg).__name__}")

