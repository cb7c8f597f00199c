"""Convex divergence generators and the quantities planners need.

A generator is a convex function f with f(1) = 0 and subgradient 0 at
1, evaluated elementwise on density-ratio arrays. The divergence of a
pair is the proposal expectation of f(ratio) plus the singular target
mass weighted by the slope of f at infinity. Sample-size planning only
ever touches f through two handles: the growth inverse (smallest t with
f(t)/t >= m) and the growth regime of f at large arguments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .distributions import DistributionPair
from .errors import ClassificationError

# Relative tolerance of the growth-inverse bisection.
GAMMA_REL_TOL = 1e-10
# Bracket cap: beyond this the inverse is reported as infinite.
GAMMA_T_MAX = 1e300
# Probe points and multiplicative sensitivity for regime classification.
REGIME_PROBES = (1e3, 1e6, 1e9)
REGIME_GROWTH_FACTOR = 1.01


class Regime(enum.Enum):
    """Growth class of f(t) as t grows.

    LINEAR means f(t)/t stays bounded (estimation from the divergence
    alone is infeasible below a threshold accuracy);
    SUPERQUADRATIC means f(t)/t^2 diverges (the 1/eps^2 term of the
    divergence planner dominates); everything in between is
    SUBQUADRATIC_SUPERLINEAR, where the growth-inverse term dominates.
    """

    LINEAR = "linear"
    SUBQUADRATIC_SUPERLINEAR = "subquadratic_superlinear"
    SUPERQUADRATIC = "superquadratic"


@dataclass(frozen=True)
class FGenerator:
    """Named convex generator with the metadata planners consume.

    ``fn`` must accept scalars and numpy arrays. ``regime`` may be None
    for user-supplied generators, in which case ``classify_regime``
    probes the growth numerically. ``c_threshold`` is the technical
    constant of the second-moment planner term; built-ins ship curated
    values, user generators get a scanned estimate.
    """

    name: str
    fn: Callable
    f_prime_at_inf: float
    regime: Optional[Regime] = None
    c_threshold: float = 1.0

    def __post_init__(self):
        _spot_check_generator(self.fn, self.name)

    def __call__(self, t):
        return self.fn(t)


def _spot_check_generator(f: Callable, name: str) -> None:
    """Reject functions that visibly violate the generator contract.

    Checks f(1) = 0, nonnegativity, convexity on random secants, and
    monotone f(t)/t on a geometric grid. Spot checks only: a fixed
    seed keeps them deterministic and cheap.
    """
    v1 = float(f(1.0))
    if not abs(v1) <= 1e-12:
        raise ValueError(f"{name}: f(1) = {v1!r}, must be 0")
    gen = np.random.Generator(np.random.Philox(key=0xF00D))
    x = gen.uniform(0.0, 50.0, 1000)
    y = gen.uniform(0.0, 50.0, 1000)
    th = gen.uniform(0.0, 1.0, 1000)
    with np.errstate(all="ignore"):
        mid = np.asarray(f(th * x + (1 - th) * y), dtype=np.float64)
        hull = th * np.asarray(f(x), dtype=np.float64) + (1 - th) * np.asarray(
            f(y), dtype=np.float64
        )
        if np.any(mid > hull + 1e-9 * (1.0 + np.abs(hull))):
            raise ValueError(f"{name}: convexity spot check failed")
        grid = np.geomspace(1.0, 1e6, 200)
        vals = np.asarray(f(grid), dtype=np.float64)
    if np.any(vals < -1e-12):
        raise ValueError(f"{name}: f must be nonnegative")
    growth = vals / grid
    if np.any(np.diff(growth) < -1e-9 * (1.0 + np.abs(growth[:-1]))):
        raise ValueError(f"{name}: f(t)/t must be non-decreasing on [1, inf)")


def _tv_fn(t):
    t = np.asarray(t, dtype=np.float64)
    out = 0.5 * np.abs(t - 1.0)
    return out if out.ndim else float(out)


def _kl_fn(t):
    t = np.asarray(t, dtype=np.float64)
    safe = np.where(t > 0, t, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, t * np.log(safe), 0.0) - t + 1.0
    return out if out.ndim else float(out)


def _chi2_fn(t):
    t = np.asarray(t, dtype=np.float64)
    out = (t - 1.0) ** 2
    return out if out.ndim else float(out)


def _hellinger_fn(t):
    t = np.asarray(t, dtype=np.float64)
    out = (np.sqrt(t) - 1.0) ** 2
    return out if out.ndim else float(out)


def tv() -> FGenerator:
    """Total variation: f(t) = |t - 1| / 2, slope 1/2 at infinity.

    f(t)/t^2 peaks at t = 2, hence the threshold constant 2."""
    return FGenerator("tv", _tv_fn, 0.5, Regime.LINEAR, c_threshold=2.0)


def kl() -> FGenerator:
    """Kullback-Leibler with the affine shift that zeroes the value and
    slope at 1: f(t) = t*log(t) - t + 1."""
    return FGenerator(
        "kl", _kl_fn, math.inf, Regime.SUBQUADRATIC_SUPERLINEAR, c_threshold=1.0
    )


def chi_squared() -> FGenerator:
    return FGenerator(
        "chi2", _chi2_fn, math.inf, Regime.SUBQUADRATIC_SUPERLINEAR, c_threshold=1.0
    )


def hellinger() -> FGenerator:
    """Squared Hellinger: f(t) = (sqrt(t) - 1)^2, slope 1 at infinity.
    f(t)/t^2 last increases at t = 4."""
    return FGenerator("hellinger", _hellinger_fn, 1.0, Regime.LINEAR, c_threshold=4.0)


def renyi(alpha: float) -> FGenerator:
    """Power generator t^alpha - alpha*(t - 1) - 1 for alpha > 1.

    The affine correction zeroes the value and slope at 1 without
    changing the divergence ordering. Superquadratic exactly when
    alpha > 2 (alpha = 2 reproduces chi-squared).
    """
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 1.0):
        raise ValueError(f"alpha must be > 1, got {alpha}")

    def fn(t, _a=alpha):
        t = np.asarray(t, dtype=np.float64)
        out = t**_a - _a * (t - 1.0) - 1.0
        return out if out.ndim else float(out)

    regime = Regime.SUPERQUADRATIC if alpha > 2 else Regime.SUBQUADRATIC_SUPERLINEAR
    # The second-moment constant is treated as 1 for the whole family.
    return FGenerator(f"renyi(alpha={alpha:g})", fn, math.inf, regime, c_threshold=1.0)


_BUILTIN_FACTORIES = {
    "tv": tv,
    "kl": kl,
    "chi2": chi_squared,
    "hellinger": hellinger,
}


def parse_f_spec(spec: str) -> FGenerator:
    """Build a generator from its CLI spelling.

    Plain names: tv, kl, chi2, hellinger. Parameterized:
    renyi:alpha=<value>.
    """
    spec = spec.strip()
    if spec in _BUILTIN_FACTORIES:
        return _BUILTIN_FACTORIES[spec]()
    if spec.startswith("renyi:"):
        params = spec[len("renyi:"):]
        key, _, value = params.partition("=")
        if key.strip() != "alpha" or not value:
            raise ValueError(f"renyi spec must be 'renyi:alpha=<value>', got {spec!r}")
        try:
            return renyi(float(value))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"bad renyi alpha in {spec!r}: {exc}") from exc
    raise ValueError(
        f"unknown generator {spec!r}; expected tv, kl, chi2, hellinger, "
        "or renyi:alpha=<value>"
    )


def f_divergence(pair: DistributionPair, f: FGenerator) -> float:
    """D_f(nu || mu) on a finite pair, computed exactly.

    Sum of mu_i * f(ratio_i) over atoms with proposal mass, plus
    singular_mass * f'(inf) for target mass the proposal cannot see.
    Returns inf when that slope is infinite and singular mass is
    present.
    """
    pos = pair.mu_weights > 0
    vals = np.asarray(f(pair.ratio_cache[pos]), dtype=np.float64)
    total = float(np.dot(pair.mu_weights[pos], vals))
    if pair.singular_mass > 0:
        if math.isinf(f.f_prime_at_inf):
            return math.inf
        total += pair.singular_mass * f.f_prime_at_inf
    return total


def gamma_f(f: FGenerator, m: float) -> float:
    """Growth inverse: smallest t >= 1 with f(t)/t >= m.

    Monotone because f(t)/t is non-decreasing on [1, inf). Returns inf
    when no t below the bracket cap qualifies, which is how linear
    generators signal infeasibility. Resolved by bracket doubling plus
    bisection to relative tolerance 1e-10.
    """
    m = float(m)
    if m < 0 or not math.isfinite(m):
        raise ValueError(f"m must be finite and >= 0, got {m}")

    def growth(t: float) -> float:
        with np.errstate(all="ignore"):
            v = float(f(t)) / t
        return v if not math.isnan(v) else math.inf

    if growth(1.0) >= m:
        return 1.0
    lo, hi = 1.0, 2.0
    while growth(hi) < m:
        lo = hi
        hi *= 2.0
        if hi > GAMMA_T_MAX:
            return math.inf
    while (hi - lo) > GAMMA_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if growth(mid) >= m:
            hi = mid
        else:
            lo = mid
    return hi


def classify_regime(f: FGenerator) -> Regime:
    """Declared regime if the generator ships one, else a numeric probe.

    The probe compares f(t)/t and f(t)/t^2 across three decade-spaced
    points; growth below 1% per jump counts as flat.
    """
    if f.regime is not None:
        return f.regime
    t = np.asarray(REGIME_PROBES, dtype=np.float64)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(t), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ClassificationError(
            f"{f.name}: non-finite values at probe points {REGIME_PROBES}"
        )
    lin = vals / t
    quad = vals / t**2
    lin_ratios = lin[1:] / lin[:-1]
    quad_ratios = quad[1:] / quad[:-1]
    if np.all(lin_ratios < REGIME_GROWTH_FACTOR):
        return Regime.LINEAR
    if np.all(quad_ratios > REGIME_GROWTH_FACTOR):
        return Regime.SUPERQUADRATIC
    return Regime.SUBQUADRATIC_SUPERLINEAR


def estimate_c_threshold(f: FGenerator, t_max: float = 1e9, points: int = 400) -> float:
    """Scanned second-moment threshold for user generators: the last
    point on a geometric grid where f(t)/t^2 still increases.

    For generators whose f(t)/t^2 keeps increasing the scan returns the
    grid cap; planners fed such a value will produce enormous (but
    honest) sample sizes.
    """
    grid = np.geomspace(1.0, t_max, points)
    with np.errstate(all="ignore"):
        g = np.asarray(f(grid), dtype=np.float64) / grid**2
    rising = g[1:] > g[:-1] * (1.0 + 1e-12)
    if not rising.any():
        return 1.0
    return float(grid[1:][rising][-1])
