"""Normalizing-constant estimators and their sample-size planners.

Estimators consume a batch of unnormalized density values and return a
report; planners convert an accuracy/confidence request into a sample
size using either the pair's exact coverage profile or a divergence
budget. Every planner constant is a named, documented module default
and is echoed into the plan it produces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coverage import CoverageProfile, min_coverage_threshold, solve_M_eps
from .distributions import SampleBatch
from .divergences import FGenerator, gamma_f
from .errors import InfeasiblePlanError

# Median-of-means group count: k = ceil(GROUP_RATE * ln(1/delta)).
GROUP_RATE = 8.0
# Leading constant of the coverage planner: n = C * M * ln(1/delta) / eps.
COVERAGE_PLAN_CONSTANT = 8.0
# Integrated coverage must drop below eps / ICOV_SLACK at the chosen M.
ICOV_SLACK = 4.0
# Divergence planner: growth inverse evaluated at FDIV_GAMMA_MULT * D / eps.
FDIV_PLAN_CONSTANT = 8.0
FDIV_GAMMA_MULT = 6.0
# Quantile planner: n = QUANTILE_PLAN_CONSTANT * M * ln(2/delta) / eps,
# with coverage below eps / QUANTILE_COV_SLACK at M (profile route) or
# M = gamma_f(QUANTILE_GAMMA_MULT * D / eps) (divergence route).
QUANTILE_PLAN_CONSTANT = 18.0
QUANTILE_COV_SLACK = 4.0
QUANTILE_GAMMA_MULT = 4.0
# Importance-sampling planners: n = IS_PLAN_CONSTANT * M / eps with the
# integrated coverage below eps * delta / IS_TARGET_DIVISOR at M.
IS_PLAN_CONSTANT = 6.0
IS_TARGET_DIVISOR = 6.0

# Success checks against (1 +/- eps) intervals treat the exact boundary
# as failure: hard two-atom instances place estimates exactly on it,
# and this guard resolves the tie deterministically under rounding.
SUCCESS_GUARD = 1e-9


class PlanSource(enum.Enum):
    MANUAL = "manual"
    COVERAGE = "coverage"
    FDIV = "fdiv"
    QUANTILE = "quantile"
    IMPORTANCE = "importance"
    SELF_NORMALIZED = "self_normalized"
    SAMPLING = "sampling"


@dataclass(frozen=True)
class PlanResult:
    """Sample size with the truncation level and constants behind it."""

    n: int
    m: float
    source: PlanSource
    constants: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    n_used: int
    k_groups: int = 0
    eps_target: Optional[float] = None
    delta_target: Optional[float] = None
    plan_source: PlanSource = PlanSource.MANUAL
    true_value: Optional[float] = None

    @property
    def rel_error(self) -> Optional[float]:
        if self.true_value is None:
            return None
        return abs(self.estimate - self.true_value) / abs(self.true_value)


def within_multiplicative(estimate: float, truth: float, eps: float) -> bool:
    """Success predicate: estimate strictly inside (1 +/- eps) * truth,
    with a 1e-9 relative guard so boundary atoms count as failures."""
    return abs(estimate - truth) <= (eps - SUCCESS_GUARD) * abs(truth)


def _check_eps_delta(eps: float, delta: float) -> None:
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")


def group_count(delta: float) -> int:
    return math.ceil(GROUP_RATE * math.log(1.0 / delta))


def median_of_means(
    batch: SampleBatch,
    delta: float,
    true_value: Optional[float] = None,
) -> EstimateReport:
    """Median of contiguous group means of the unnormalized density.

    Uses k = ceil(8 ln(1/delta)) groups of floor(n/k) samples each,
    discarding the remainder; for even k the lower median is taken.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    k = group_count(delta)
    if batch.n < k:
        raise ValueError(f"batch has {batch.n} samples; need at least k = {k}")
    m = batch.n // k
    means = batch.lambdas[: k * m].reshape(k, m).mean(axis=1)
    means.sort()
    est = float(means[(k - 1) // 2])
    return EstimateReport(
        estimate=est,
        n_used=k * m,
        k_groups=k,
        delta_target=delta,
        true_value=true_value,
    )


def quantile_estimator(
    batch: SampleBatch,
    eps: float,
    m: float,
    true_value: Optional[float] = None,
) -> EstimateReport:
    """Upper order statistic of the density values at rank
    ceil((1 - eps/(4M)) * n); one-sided by design, never more than a
    factor M above the truth and rarely below (1 - eps) of it when the
    coverage at M is small."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if batch.n < 1:
        raise ValueError("batch is empty")
    alpha = eps / (4.0 * m)
    rank = math.ceil((1.0 - alpha) * batch.n)  # 1-based
    rank = min(max(rank, 1), batch.n)
    est = float(np.partition(batch.lambdas, rank - 1)[rank - 1])
    return EstimateReport(
        estimate=est,
        n_used=batch.n,
        eps_target=eps,
        plan_source=PlanSource.QUANTILE,
        true_value=true_value,
    )


def importance_sampling(
    batch: SampleBatch,
    g_values: np.ndarray,
    ratios: np.ndarray,
    true_value: Optional[float] = None,
) -> EstimateReport:
    """Plain importance sampling of E_nu[g] with known normalized
    ratios: the mean of ratio * g over the proposal draws."""
    g_values = np.asarray(g_values, dtype=np.float64)
    ratios = np.asarray(ratios, dtype=np.float64)
    if g_values.shape != ratios.shape:
        raise ValueError(
            f"g table has {g_values.size} entries, ratio table has {ratios.size}"
        )
    if batch.atoms.max(initial=-1) >= g_values.size:
        raise ValueError("batch indexes atoms outside the supplied tables")
    vals = ratios[batch.atoms] * g_values[batch.atoms]
    return EstimateReport(
        estimate=float(vals.mean()),
        n_used=batch.n,
        plan_source=PlanSource.IMPORTANCE,
        true_value=true_value,
    )


def importance_sampling_mom(
    batch: SampleBatch,
    g_values: np.ndarray,
    ratios: np.ndarray,
    delta: float,
    true_value: Optional[float] = None,
) -> EstimateReport:
    """Median-of-means hardening of plain importance sampling; trades
    the in-probability constant for log(1/delta) confidence."""
    g_values = np.asarray(g_values, dtype=np.float64)
    ratios = np.asarray(ratios, dtype=np.float64)
    if g_values.shape != ratios.shape:
        raise ValueError("g and ratio tables must have identical shape")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    k = group_count(delta)
    if batch.n < k:
        raise ValueError(f"batch has {batch.n} samples; need at least k = {k}")
    vals = ratios[batch.atoms] * g_values[batch.atoms]
    m = batch.n // k
    means = vals[: k * m].reshape(k, m).mean(axis=1)
    means.sort()
    return EstimateReport(
        estimate=float(means[(k - 1) // 2]),
        n_used=k * m,
        k_groups=k,
        delta_target=delta,
        plan_source=PlanSource.IMPORTANCE,
        true_value=true_value,
    )


def snis(
    batch: SampleBatch,
    g_values: np.ndarray,
    true_value: Optional[float] = None,
) -> EstimateReport:
    """Self-normalized importance sampling of E_nu[g]: density-weighted
    mean of g. Invariant under rescaling the density values, so it
    needs no normalizing constant; undefined when every weight is 0."""
    g_values = np.asarray(g_values, dtype=np.float64)
    if batch.atoms.max(initial=-1) >= g_values.size:
        raise ValueError("batch indexes atoms outside the supplied g table")
    total = float(batch.lambdas.sum())
    if total <= 0:
        raise ZeroDivisionError(
            "all density values in the batch are zero; the self-normalized "
            "estimate is undefined"
        )
    est = float(np.dot(batch.lambdas, g_values[batch.atoms]) / total)
    return EstimateReport(
        estimate=est,
        n_used=batch.n,
        plan_source=PlanSource.SELF_NORMALIZED,
        true_value=true_value,
    )


def plan_n_coverage(profile: CoverageProfile, eps: float, delta: float) -> PlanResult:
    """Median-of-means budget from the exact profile: pick the smallest
    M with IC_M <= (eps/4) * M, then n = ceil(8 M ln(1/delta) / eps)."""
    _check_eps_delta(eps, delta)
    m = solve_M_eps(profile, eps / ICOV_SLACK)
    n = math.ceil(COVERAGE_PLAN_CONSTANT * m * math.log(1.0 / delta) / eps)
    return PlanResult(
        n=max(n, 1),
        m=m,
        source=PlanSource.COVERAGE,
        constants={
            "plan_constant": COVERAGE_PLAN_CONSTANT,
            "icov_slack": ICOV_SLACK,
        },
    )


def plan_n_fdiv(
    f: FGenerator,
    divergence: float,
    eps: float,
    delta: float,
    c: Optional[float] = None,
) -> PlanResult:
    """Median-of-means budget from a divergence value alone.

    n = ceil(8 * max(gamma_f(6 D / eps) ln(1/delta) / eps,
                     c^2 ln(1/delta) / eps^2)).
    Infeasible when the growth inverse is infinite at the required
    argument, which is the hallmark of linear-regime generators.
    """
    _check_eps_delta(eps, delta)
    if divergence < 0 or math.isnan(divergence):
        raise ValueError("divergence must be nonnegative")
    if math.isinf(divergence):
        raise InfeasiblePlanError(
            f"{f.name}: infinite divergence (singular target mass?)"
        )
    c = f.c_threshold if c is None else float(c)
    m = gamma_f(f, FDIV_GAMMA_MULT * divergence / eps)
    if math.isinf(m):
        raise InfeasiblePlanError(
            f"{f.name}: growth inverse is infinite at "
            f"{FDIV_GAMMA_MULT * divergence / eps:g}; the generator grows too "
            "slowly for this accuracy (linear regime)"
        )
    log_term = math.log(1.0 / delta)
    n = math.ceil(
        FDIV_PLAN_CONSTANT * max(m * log_term / eps, c * c * log_term / eps**2)
    )
    return PlanResult(
        n=max(n, 1),
        m=m,
        source=PlanSource.FDIV,
        constants={
            "plan_constant": FDIV_PLAN_CONSTANT,
            "gamma_mult": FDIV_GAMMA_MULT,
            "c_threshold": c,
        },
    )


def plan_n_quantile(
    eps: float,
    delta: float,
    profile: Optional[CoverageProfile] = None,
    f: Optional[FGenerator] = None,
    divergence: Optional[float] = None,
    gamma_mult: float = QUANTILE_GAMMA_MULT,
) -> PlanResult:
    """Quantile-estimator budget: n = ceil(18 M ln(2/delta) / eps).

    M comes either from the profile (infimum level with coverage at
    most eps/4) or from the divergence route gamma_f(gamma_mult*D/eps);
    the multiplier is exposed because published variants differ (4 in
    the tight analysis, 6 in a looser one).
    """
    _check_eps_delta(eps, delta)
    if (profile is None) == (f is None):
        raise ValueError("supply exactly one of profile or (f, divergence)")
    if profile is not None:
        m = min_coverage_threshold(profile, eps / QUANTILE_COV_SLACK)
        route = {"cov_slack": QUANTILE_COV_SLACK}
    else:
        if divergence is None:
            raise ValueError("divergence value required with a generator")
        m = gamma_f(f, gamma_mult * divergence / eps)
        if math.isinf(m):
            raise InfeasiblePlanError(
                f"{f.name}: growth inverse infinite at "
                f"{gamma_mult * divergence / eps:g}"
            )
        route = {"gamma_mult": gamma_mult}
    m = max(m, 1.0)
    n = math.ceil(QUANTILE_PLAN_CONSTANT * m * math.log(2.0 / delta) / eps)
    return PlanResult(
        n=max(n, 1),
        m=m,
        source=PlanSource.QUANTILE,
        constants={"plan_constant": QUANTILE_PLAN_CONSTANT, **route},
    )


def plan_n_is(
    weighted_profile: CoverageProfile, eps: float, delta: float
) -> PlanResult:
    """Plain importance sampling budget: the confidence enters through
    the integrated-coverage target eps*delta/6 on the reweighted
    target's profile; n = ceil(6 M / eps)."""
    _check_eps_delta(eps, delta)
    m = solve_M_eps(weighted_profile, eps * delta / IS_TARGET_DIVISOR)
    n = math.ceil(IS_PLAN_CONSTANT * m / eps)
    return PlanResult(
        n=max(n, 1),
        m=m,
        source=PlanSource.IMPORTANCE,
        constants={
            "plan_constant": IS_PLAN_CONSTANT,
            "icov_target_divisor": IS_TARGET_DIVISOR,
        },
    )


def plan_n_snis(
    profile: CoverageProfile,
    weighted_profile: CoverageProfile,
    eps: float,
    delta: float,
) -> PlanResult:
    """Self-normalized budget: both the base and the reweighted profile
    must clear the eps*delta/6 integrated-coverage target; the larger
    of the two levels drives n = ceil(6 M / eps)."""
    _check_eps_delta(eps, delta)
    target = eps * delta / IS_TARGET_DIVISOR
    m = max(solve_M_eps(profile, target), solve_M_eps(weighted_profile, target))
    n = math.ceil(IS_PLAN_CONSTANT * m / eps)
    return PlanResult(
        n=max(n, 1),
        m=m,
        source=PlanSource.SELF_NORMALIZED,
        constants={
            "plan_constant": IS_PLAN_CONSTANT,
            "icov_target_divisor": IS_TARGET_DIVISOR,
        },
    )
