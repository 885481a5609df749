"""Trial orchestration, per-trial random streams and coverage estimates.

Trial ``i`` of a run seeded with ``seed`` always draws from the same Philox
counter block, so outcomes do not depend on how many trials ran before it or
on which worker ran it. Aggregation is integer counting, which keeps results
bit-identical for any worker count.
"""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

WORKERS_ENV = "RURALCOV_WORKERS"
Z95 = 1.959963984540054
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class CoverageEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_trials: int
    seed: int

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not 0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0:
            raise ValueError(f"inconsistent estimate {self}")

    @classmethod
    def from_counts(cls, successes: int, n: int, seed: int) -> "CoverageEstimate":
        lo, hi = wilson_interval(successes, n)
        p = successes / n
        return cls(p, min(lo, p), max(hi, p), n, seed)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.n_trials)

    def overlaps(self, other: "CoverageEstimate") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def trial_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based sub-stream: Philox keyed by ``(seed, stream)``, counter block ``index``."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, stream & _MASK64],
                                                counter=[0, 0, 0, index]))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


TrialFn = Callable[[np.random.Generator], object]


def _split_result(result):
    if isinstance(result, tuple):
        outcome, digest = result
    else:
        outcome, digest = result, None
    return np.atleast_1d(np.asarray(outcome, dtype=bool)), digest


def _run_chunk(trial_fn: TrialFn, seed: int, start: int, stop: int, keep_outcomes: bool):
    counts = None
    digests = []
    outcomes = [] if keep_outcomes else None
    for i in range(start, stop):
        outcome, digest = _split_result(trial_fn(trial_rng(seed, i)))
        counts = outcome.astype(np.int64) if counts is None else counts + outcome
        if digest is not None:
            digests.append(digest)
        if keep_outcomes:
            outcomes.append(outcome)
    return counts, digests, outcomes


@dataclass
class BatchResult:
    successes: np.ndarray
    n_trials: int
    seed: int
    geometry_digest: str | None = None
    outcomes: np.ndarray | None = field(default=None, repr=False)

    def estimates(self) -> list[CoverageEstimate]:
        return [CoverageEstimate.from_counts(int(k), self.n_trials, self.seed) for k in self.successes]


def run_batch(trial_fn: TrialFn, n: int, seed: int, workers: int | None = None,
              keep_outcomes: bool = False) -> BatchResult:
    """Run ``n`` trials and count successes per outcome slot.

    ``trial_fn(rng)`` returns a bool, a bool array (one slot per mode/sweep
    value), or ``(outcomes, geometry_bytes)``. Geometry bytes from all trials are
    hashed in trial order into ``geometry_digest``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, n)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        parts = [_run_chunk(trial_fn, seed, a, b, keep_outcomes) for a, b in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, trial_fn, seed, a, b, keep_outcomes) for a, b in chunks]
            parts = [f.result() for f in futures]
    counts = sum(p[0] for p in parts)
    digest = None
    all_digests = [d for p in parts for d in p[1]]
    if all_digests:
        h = hashlib.sha256()
        for d in all_digests:
            h.update(d)
        digest = h.hexdigest()
    outcomes = np.vstack([o for p in parts for o in p[2]]) if keep_outcomes else None
    return BatchResult(counts, n, seed, digest, outcomes)


def run_trials(trial_fn: TrialFn, n: int, seed: int, workers: int | None = None) -> CoverageEstimate:
    """Coverage estimate with a Wilson 95% interval for a single-outcome trial."""
    batch = run_batch(trial_fn, n, seed, workers)
    if len(batch.successes) != 1:
        raise ValueError("trial function returned several outcomes; use run_batch")
    return batch.estimates()[0]


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    mode: str
    estimate: CoverageEstimate


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    geometry_digests: dict[str, str] = field(default_factory=dict)
    notes: dict[str, object] = field(default_factory=dict)

    def add(self, value: float, mode: str, estimate: CoverageEstimate):
        if any(r.sweep_value == value and r.mode == mode for r in self.rows):
            raise ValueError(f"duplicate sweep row ({value}, {mode})")
        self.rows.append(SweepRow(float(value), mode, estimate))

    def extend(self, other: "SweepResult"):
        for r in other.rows:
            self.add(r.sweep_value, r.mode, r.estimate)
        self.geometry_digests.update(other.geometry_digests)
        self.notes.update(other.notes)

    def get(self, value: float, mode: str) -> CoverageEstimate:
        for r in self.rows:
            if r.sweep_value == value and r.mode == mode:
                return r.estimate
        raise KeyError((value, mode))

    def modes(self) -> list[str]:
        return list(dict.fromkeys(r.mode for r in self.rows))

    def values(self, mode: str | None = None) -> list[float]:
        return [r.sweep_value for r in self.rows if mode is None or r.mode == mode]

    def series(self, mode: str) -> list[CoverageEstimate]:
        return [r.estimate for r in self.rows if r.mode == mode]


Runner = Callable[[float, int, int, int | None], SweepResult]


def sweep(runner: Runner, axis: Iterable[float], n: int, seed: int, workers: int | None = None) -> SweepResult:
    """Evaluate ``runner(value, n, seed, workers)`` at every axis value, in order.

    Every value reuses the same seed, so each trial index sees the same random
    stream at every point of the axis (common random numbers).
    """
    axis = list(axis)
    if not axis:
        raise ValueError("sweep axis is empty")
    result = SweepResult()
    for value in axis:
        result.extend(runner(value, n, seed, workers))
    return result


def geometry_bytes(*arrays: Sequence) -> bytes:
    """Short fingerprint of one trial's geometry."""
    h = hashlib.blake2b(digest_size=8)
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.digest()
