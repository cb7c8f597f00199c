"""Exponential-race sampler.

Each candidate drawn from the proposal gets an arrival time from a
unit-rate Poisson process; dividing arrivals by the unnormalized
density turns the race into one whose winner is approximately
target-distributed. The argmin is invariant to the unknown
normalizer, so the race only ever sees lambda values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DistributionPair
from .errors import AllNullDrawsError
from .rng import derive_seed, make_generator, standard_exponential

# Races are processed in blocks; the block width is a fixed function
# of n so that resampling with the same master seed is reproducible
# regardless of trial count.
RACE_CHUNK_ELEMENTS = 1 << 20
# Planner: n = ceil(SAMPLING_PLAN_CONSTANT * M * ln(3/eps)).
SAMPLING_PLAN_CONSTANT = 2.0


@dataclass(frozen=True)
class RaceState:
    """Full trace of one race, kept for inspection and tests."""

    atoms: np.ndarray
    arrivals: np.ndarray
    scores: np.ndarray
    best_index: int
    best_score: float


@dataclass(frozen=True)
class RaceSummary:
    """Winner counts over repeated races; null races are ones where
    every drawn atom had zero density."""

    counts: np.ndarray
    null_races: int
    trials: int
    n_per_race: int


def _scores(arrivals: np.ndarray, lam: np.ndarray) -> np.ndarray:
    out = np.full(arrivals.shape, np.inf)
    np.divide(arrivals, lam, out=out, where=lam > 0)
    return out


def astar_sample(pair: DistributionPair, n: int, seed: int) -> tuple[int, RaceState]:
    """Run one race of length n and return the winning atom index.

    Atoms are drawn from the proposal, arrival times are cumulative
    sums of Exp(1) increments, and the winner minimizes arrival over
    density. Zero-density atoms score +inf; ties go to the earliest
    draw. Raises AllNullDrawsError when no draw has positive density.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gen = make_generator(seed)
    cdf = np.cumsum(pair.mu_weights)
    atoms = np.searchsorted(cdf, gen.random(n), side="right")
    np.clip(atoms, 0, pair.support_size - 1, out=atoms)
    arrivals = np.cumsum(standard_exponential(gen, n))
    scores = _scores(arrivals, pair.lambda_values[atoms])
    best = int(np.argmin(scores))
    if math.isinf(scores[best]):
        raise AllNullDrawsError(
            f"all {n} draws landed on zero-density atoms; the race has no winner"
        )
    state = RaceState(
        atoms=atoms,
        arrivals=arrivals,
        scores=scores,
        best_index=best,
        best_score=float(scores[best]),
    )
    return int(atoms[best]), state


def run_races(
    pair: DistributionPair, n: int, trials: int, master_seed: int
) -> RaceSummary:
    """Repeat the race `trials` times with derived per-block seeds and
    tally winners; null races are counted, not raised."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    block = max(1, RACE_CHUNK_ELEMENTS // n)
    cdf = np.cumsum(pair.mu_weights)
    lam_table = pair.lambda_values
    counts = np.zeros(pair.support_size, dtype=np.int64)
    null_races = 0
    for chunk_index, start in enumerate(range(0, trials, block)):
        rows = min(block, trials - start)
        gen = make_generator(int(derive_seed(master_seed, chunk_index)))
        atoms = np.searchsorted(cdf, gen.random((rows, n)), side="right")
        np.clip(atoms, 0, pair.support_size - 1, out=atoms)
        arrivals = np.cumsum(standard_exponential(gen, (rows, n)), axis=1)
        scores = _scores(arrivals, lam_table[atoms])
        best = np.argmin(scores, axis=1)
        winners = atoms[np.arange(rows), best]
        alive = np.isfinite(scores[np.arange(rows), best])
        null_races += int(rows - alive.sum())
        counts += np.bincount(winners[alive], minlength=pair.support_size)
    return RaceSummary(
        counts=counts, null_races=null_races, trials=trials, n_per_race=n
    )


def empirical_tv(summary: RaceSummary, pair: DistributionPair) -> float:
    """Total variation between the winner frequencies and the target.

    Null races are phantom mass the target does not have, so they
    contribute their full rate to the L1 sum.
    """
    freq = summary.counts / summary.trials
    err = summary.null_races / summary.trials
    return 0.5 * (float(np.abs(freq - pair.nu_weights).sum()) + err)


def plan_n_sampling(m: float, eps: float) -> int:
    """Race length for TV error at most eps given a level M whose
    coverage is at most eps/3: n = ceil(2 M ln(3/eps))."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0 < eps < 3:
        raise ValueError(f"eps must be in (0, 3), got {eps}")
    return max(1, math.ceil(SAMPLING_PLAN_CONSTANT * m * math.log(3.0 / eps)))
