import math
from dataclasses import replace
from functools import partial

import numpy as np
import pytest
from scipy import stats

from ruralcov.channel import ChannelParams, coverage_batch, sample_link_snapshot
from ruralcov.energy import UavEnergyParams
from ruralcov.montecarlo import run_batch, run_trials, trial_rng
from ruralcov.scenarios import (ClusterPair, DeploymentMode as M, Scenario1Config, Scenario2Config, Scenario3Config,
                                canonical_pair, coverage_with_availability, pair_coverage_objective,
                                place_ee_station, place_re_station, place_uav_optimal, run_scenario1,
                                run_scenario2, run_scenario3, scenario1_trial, _scenario_geometry)
from ruralcov.spatial import ClusterSpec, GroundPoint, NoRoadError, RoadLine
from ruralcov.stations import HarvestProfile

CH = ChannelParams()
SIGMA = math.sqrt(120.0)


def test_place_ee_station_examples():
    assert place_ee_station((100.0, 50.0), (0.0, 0.0), 500.0) == (100.0, 50.0)
    assert place_ee_station((1000.0, 0.0), (0.0, 0.0), 500.0) == pytest.approx((500.0, 0.0))
    with pytest.raises(ValueError):
        place_ee_station((0.0, 0.0), (0.0, 0.0), 0.0)


def test_place_ee_station_beats_random_disk_points():
    rng = np.random.default_rng(0)
    for _ in range(20):
        center = rng.uniform(-1000, 1000, 2)
        radius = float(rng.uniform(50, 1000))
        uav = rng.uniform(-3000, 3000, 2)
        got = place_ee_station(uav, center, radius)
        assert math.dist(got, center) <= radius + 1e-9
        cand = rng.uniform(-radius, radius, size=(30_000, 2))
        cand = cand[np.hypot(*cand.T) <= radius][:10_000] + center
        assert math.dist(got, uav) <= np.min(np.hypot(*(cand - uav).T)) + 1e-9


def test_place_re_station_examples():
    living = ClusterSpec(GroundPoint(0.0, 0.0), SIGMA)
    assert place_re_station((0.0, 0.0), [], living) == (0.0, 0.0)
    assert place_re_station((1000.0, 0.0), [RoadLine(0.0, 800.0)], living) == pytest.approx((800.0, 0.0))
    with pytest.raises(NoRoadError):
        place_re_station((1000.0, 0.0), [], living)


def test_place_re_station_on_road_or_in_zone():
    rng = np.random.default_rng(1)
    living = ClusterSpec(GroundPoint(0.0, 0.0), SIGMA)
    for _ in range(200):
        roads = [RoadLine(float(a), float(o)) for a, o in
                 zip(rng.uniform(0, math.pi, 3), rng.uniform(-2000, 2000, 3))]
        uav = rng.uniform(-100, 100, 2) * rng.choice([0.1, 10.0])
        p = place_re_station(uav, roads, living)
        on_road = min(abs(p.x * math.cos(r.angle) + p.y * math.sin(r.angle) - r.offset) for r in roads) < 1e-6
        assert on_road or math.dist(p, living.center) <= 3 * SIGMA


def test_uav_placement_degenerate_pair():
    pair = canonical_pair(0.0, SIGMA)
    assert place_uav_optimal(pair, 0.9, CH, 60.0, np.random.default_rng(0)) == (0.0, 0.0)


def test_uav_placement_symmetric_pair_gives_midpoint():
    # broad clusters relative to the gap make the objective single-peaked at the midpoint
    pair = canonical_pair(200.0, 300.0)
    p = place_uav_optimal(pair, 0.5, CH, 60.0, np.random.default_rng(1), n_samples=100_000)
    assert abs(p.x - 100.0) < 10.0 and p.y == 0.0


def test_uav_placement_favours_working_cluster():
    pair = canonical_pair(1000.0, SIGMA)
    p = place_uav_optimal(pair, 10 / 11, CH, 60.0, np.random.default_rng(2))
    assert math.dist(p, pair.working_center) < 500.0


def test_uav_placement_deterministic_given_seed():
    pair = ClusterPair(ClusterSpec(GroundPoint(10.0, 20.0), SIGMA), ClusterSpec(GroundPoint(700.0, -300.0), SIGMA))
    a = place_uav_optimal(pair, 0.7, CH, 60.0, np.random.default_rng(3))
    b = place_uav_optimal(pair, 0.7, CH, 60.0, np.random.default_rng(3))
    assert a == b


@pytest.mark.parametrize("d, sigma", [(150.0, 60.0), (300.0, 120.0), (1000.0, SIGMA)])
def test_segment_search_is_not_beaten_by_a_2d_grid(d, sigma):
    pair = canonical_pair(d, sigma)
    rng = np.random.default_rng(4)
    best = place_uav_optimal(pair, 10 / 11, CH, 60.0, trial_rng(9, 0), n_samples=20_000)
    users = np.where((rng.random(20_000) < 10 / 11)[:, None], [d, 0.0], [0.0, 0.0]) + rng.normal(size=(20_000, 2)) * sigma
    xs = np.linspace(-0.25 * d, 1.25 * d, 31)
    ys = np.linspace(-0.5 * d, 0.5 * d, 21)
    grid = np.array([(x, y) for x in xs for y in ys])
    grid_best = pair_coverage_objective(grid, users, CH, 60.0).max()
    on_segment = pair_coverage_objective(np.array([best]), users, CH, 60.0)[0]
    assert on_segment >= grid_best - 0.01


def test_zero_charge_time_re_at_center_equals_always_on():
    cfg = Scenario1Config(charge_times_s=(0.0,), modes=(M.RE_AT_CENTER,))

    def always_on(rng):
        centers, large = _scenario_geometry(cfg, rng)
        user = centers[0] + rng.normal(0.0, cfg.user_stddev, size=2)
        return coverage_with_availability(cfg, centers, user, large[None, :], np.ones((1, len(centers))), rng)

    a = run_batch(partial(scenario1_trial, cfg), 500, seed=5)
    b = run_batch(always_on, 500, seed=5)
    assert np.array_equal(a.successes, b.successes)


def test_all_uavs_inactive_is_tbs_only():
    rng = np.random.default_rng(6)
    for _ in range(200):
        xy = np.vstack((rng.uniform(-5000, 5000, size=(5, 2)), [0.0, 0.0]))
        user = rng.uniform(-3000, 3000, 2)
        snap = sample_link_snapshot(user, xy, np.r_[np.full(5, 60.0), 0.0], CH, rng)
        active = np.zeros((1, 6), bool)
        active[0, 5] = True
        assert coverage_batch(snap, active, CH)[0] == (snap.rx_power[5] / CH.noise_power > CH.sinr_threshold)

    # endless charging switches every UAV off in every mode
    cfg = Scenario1Config(charge_times_s=(1e15,))
    res = run_scenario1(cfg, 400, seed=7)
    counts = {e.p_hat for e in res.series(str(M.EE_CENTRAL_ONLY)) + res.series(str(M.RE_AT_CENTER))}
    assert len(counts) == 1

    def tbs_only(rng):
        ref = rng.uniform(-5000, 5000, 2) + rng.normal(0.0, SIGMA, 2)
        snap = sample_link_snapshot(ref, np.zeros((1, 2)), np.zeros(1), CH, rng)
        return bool(snap.rx_power[0] / CH.noise_power > CH.sinr_threshold)

    ref = run_trials(tbs_only, 4000, seed=8)
    assert ref.overlaps(res.get(1e15, str(M.RE_AT_CENTER)))


def test_modes_collapse_without_travel_or_charging():
    fast = UavEnergyParams(speed_mps=1e9)
    cfg = Scenario1Config(energy=fast, charge_times_s=(0.0,))
    res = run_scenario1(cfg, 2000, seed=9)
    est = [res.get(0.0, str(m)) for m in cfg.modes]
    k = [round(e.p_hat * e.n_trials) for e in est]
    for other in k[1:]:
        table = [[k[0], 2000 - k[0]], [other, 2000 - other]]
        assert stats.chi2_contingency(table).pvalue > 0.01 or k[0] == other


def test_scenario1_translation_invariance():
    base = Scenario1Config(charge_times_s=(3600.0,))
    moved = replace(base, origin=(1234.5, -987.25))
    a = run_scenario1(base, 300, seed=10)
    b = run_scenario1(moved, 300, seed=10)
    assert [r.estimate.p_hat for r in a.rows] == [r.estimate.p_hat for r in b.rows]


def test_scenario3_translation_invariance():
    base = Scenario3Config(distances_m=(1000.0,), placement_samples=2000)
    moved = replace(base, origin=(-3000.0, 450.0))
    a = run_scenario3(base, 200, seed=11)
    b = run_scenario3(moved, 200, seed=11)
    assert [r.estimate.p_hat for r in a.rows] == [r.estimate.p_hat for r in b.rows]


def test_scenario2_capacity_zero_equals_ee_only():
    cfg = Scenario2Config(capacities_wh=(0.0, 177.6))
    res = run_scenario2(cfg, 60, seed=12)
    assert res.get(0.0, "RE_AT_CENTER") == res.get(0.0, "EE_CENTRAL_ONLY")
    assert res.get(0.0, "EE_CENTRAL_ONLY") == res.get(177.6, "EE_CENTRAL_ONLY")


def test_scenario2_large_capacity_converges_to_unbounded_storage():
    cfg = Scenario2Config(capacities_wh=(1e5, math.inf), harvest=HarvestProfile(20_000.0),
                          modes=(M.RE_AT_CENTER,))
    res = run_scenario2(cfg, 60, seed=13)
    assert res.get(1e5, "RE_AT_CENTER") == res.get(math.inf, "RE_AT_CENTER")


def test_scenario3_zero_distance_modes_coincide():
    cfg = Scenario3Config(distances_m=(0.0,))
    res = run_scenario3(cfg, 300, seed=14)
    assert res.get(0.0, "RE_ON_ROAD").p_hat == res.get(0.0, "EE_PER_CLUSTER_EDGE").p_hat


def test_scenario3_flags_missing_roads():
    cfg = Scenario3Config(distances_m=(4000.0,), placement_samples=2000,
                          densities=replace(Scenario3Config().densities, lambda_roads=1e-7))
    res = run_scenario3(cfg, 100, seed=15)
    assert res.notes["re_fallback_trials@d=4000"] > 0
    assert 0.0 < res.notes["uav_fraction@d=4000"] <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        Scenario1Config(charge_times_s=())
    with pytest.raises(ValueError):
        Scenario2Config(capacities_wh=(-1.0,))
    with pytest.raises(ValueError):
        Scenario3Config(distances_m=(-5.0,))
    with pytest.raises(ValueError):
        Scenario3Config(modes=(M.RE_UAV,))
