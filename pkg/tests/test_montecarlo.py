import numpy as np
import pytest
from scipy import stats

from ruralcov.montecarlo import (CoverageEstimate, SweepResult, geometry_bytes, run_batch, run_trials, sweep,
                                 trial_rng, wilson_interval)


def always(rng):
    return True


def coin(rng):
    return rng.random() < 0.5


def two_slots(rng):
    u = rng.random()
    return np.array([u < 0.3, u < 0.7]), geometry_bytes([u])


def test_always_true():
    est = run_trials(always, 100, seed=1)
    assert est.p_hat == 1.0 and est.ci_high == 1.0 and est.ci_low < 1.0


def test_fair_coin():
    est = run_trials(coin, 100_000, seed=2)
    assert 0.494 <= est.p_hat <= 0.506
    assert est.ci_low < 0.5 < est.ci_high


def test_same_seed_same_estimate():
    assert run_trials(coin, 2000, seed=3) == run_trials(coin, 2000, seed=3)
    assert run_trials(coin, 2000, seed=3) != run_trials(coin, 2000, seed=4)


def test_trial_streams_are_prefix_stable():
    """Trial i sees the same stream whatever n is."""
    a = run_batch(two_slots, 400, seed=5, keep_outcomes=True)
    b = run_batch(two_slots, 200, seed=5, keep_outcomes=True)
    assert np.array_equal(a.outcomes[:200], b.outcomes)
    assert trial_rng(5, 7).random() == trial_rng(5, 7).random()
    assert trial_rng(5, 7).random() != trial_rng(5, 8).random()
    assert trial_rng(5, 7).random() != trial_rng(5, 7, stream=1).random()


def test_worker_count_invariance():
    one = run_batch(two_slots, 300, seed=6, workers=1)
    two = run_batch(two_slots, 300, seed=6, workers=2)
    assert np.array_equal(one.successes, two.successes)
    assert one.geometry_digest == two.geometry_digest


def test_wilson_interval_coverage():
    rng = np.random.default_rng(7)
    for p in (0.02, 0.3, 0.95):
        hits = 0
        for k in rng.binomial(1000, p, size=1000):
            lo, hi = wilson_interval(int(k), 1000)
            hits += lo <= p <= hi
        assert hits / 1000 >= 0.93


def test_wilson_interval_matches_reference():
    lo, hi = wilson_interval(30, 100)
    ref = stats.binomtest(30, 100).proportion_ci(0.95, method="wilson")
    assert lo == pytest.approx(float(ref.low), abs=1e-9)
    assert hi == pytest.approx(float(ref.high), abs=1e-9)
    assert wilson_interval(0, 50)[0] == 0.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_estimate_validation():
    with pytest.raises(ValueError):
        CoverageEstimate(0.5, 0.6, 0.7, 10, 0)
    est = CoverageEstimate.from_counts(5, 10, 0)
    assert est.std_error == pytest.approx(np.sqrt(0.025))
    assert est.overlaps(CoverageEstimate.from_counts(6, 10, 0))


def runner(value, n, seed, workers):
    res = SweepResult()
    res.add(value, "A", run_trials(lambda rng: rng.random() < value, n, seed, workers))
    return res


def test_sweep_orders_rows_and_shares_streams():
    single = sweep(runner, [0.5], 100, seed=8)
    assert len(single.rows) == 1
    res = sweep(runner, [0.2, 0.5, 0.8], 1000, seed=8)
    assert res.values() == [0.2, 0.5, 0.8]
    # common random numbers: counts are monotone in the threshold
    p = [e.p_hat for e in res.series("A")]
    assert p == sorted(p)
    with pytest.raises(ValueError):
        sweep(runner, [], 10, 0)
    with pytest.raises(ValueError):
        res.add(0.2, "A", res.get(0.2, "A"))
