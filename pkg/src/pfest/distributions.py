"""Finite-support proposal/target pairs with exact density ratios.

A pair holds a proposal ``mu`` and a target ``nu`` on a shared finite
support, plus the true normalizing constant ``z_true`` used to evaluate
the unnormalized density ``lambda = z_true * dnu/dmu``. Everything
downstream (coverage profiles, planners, estimators, the sampling race)
consumes these pairs, and because the support is finite every tail
quantity has an exact closed form to test against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import make_generator

# Inputs whose weights deviate from a probability vector by more than
# this are rejected rather than silently renormalized.
WEIGHT_SUM_TOL = 1e-9

# Consistency of E_mu[ratio] with the nu-mass actually reachable from mu.
RATIO_MEAN_TOL = 1e-12


def _as_weight_array(w, label: str) -> np.ndarray:
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{label} must be a non-empty 1-d weight vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{label} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{label} contains negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(
            f"{label} sums to {total!r}; must be within {WEIGHT_SUM_TOL} of 1"
        )
    return arr / total


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DistributionPair:
    """Proposal/target pair on a shared finite support.

    ``ratio_cache[i]`` is dnu/dmu at atom i: ``nu[i]/mu[i]`` where the
    proposal has mass, ``inf`` where the target has mass but the
    proposal does not (that mass is also totalled in
    ``singular_mass``), and 0 on atoms carrying neither.
    """

    mu_weights: np.ndarray
    nu_weights: np.ndarray
    z_true: float
    name: str = ""
    ratio_cache: np.ndarray = field(init=False, repr=False, compare=False)
    singular_mass: float = field(init=False, compare=False)

    def __post_init__(self):
        mu = _as_weight_array(self.mu_weights, "mu_weights")
        nu = _as_weight_array(self.nu_weights, "nu_weights")
        if mu.shape != nu.shape:
            raise ValueError(
                f"support mismatch: mu has {mu.size} atoms, nu has {nu.size}"
            )
        z = float(self.z_true)
        if not (math.isfinite(z) and z > 0):
            raise ValueError(f"z_true must be positive and finite, got {z!r}")

        pos = mu > 0
        ratio = np.zeros_like(mu)
        np.divide(nu, mu, out=ratio, where=pos)
        singular = float(nu[~pos].sum())
        ratio[~pos & (nu > 0)] = np.inf

        mean = float(np.dot(mu[pos], ratio[pos]))
        if abs(mean + singular - 1.0) > RATIO_MEAN_TOL:
            raise ValueError(
                "inconsistent pair: E_mu[ratio] + singular_mass = "
                f"{mean + singular!r}, expected 1"
            )

        object.__setattr__(self, "mu_weights", _freeze(mu))
        object.__setattr__(self, "nu_weights", _freeze(nu))
        object.__setattr__(self, "z_true", z)
        object.__setattr__(self, "ratio_cache", _freeze(ratio))
        object.__setattr__(self, "singular_mass", singular)

    @property
    def support_size(self) -> int:
        return int(self.mu_weights.size)

    @property
    def absolutely_continuous(self) -> bool:
        return self.singular_mass == 0.0

    @property
    def lambda_values(self) -> np.ndarray:
        """Unnormalized target density z_true * dnu/dmu per atom."""
        return self.z_true * self.ratio_cache

    def nu_mean(self, g) -> float:
        """E_nu[g] for a per-atom function table ``g``."""
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.nu_weights.shape:
            raise ValueError(
                f"g has {g.size} entries, support has {self.support_size}"
            )
        return float(np.dot(self.nu_weights, g))


@dataclass(frozen=True)
class SampleBatch:
    """i.i.d. proposal draws with their unnormalized density values."""

    atoms: np.ndarray
    lambdas: np.ndarray
    seed: int
    n: int

    def __post_init__(self):
        if self.atoms.shape != (self.n,) or self.lambdas.shape != (self.n,):
            raise ValueError("batch arrays must both have shape (n,)")
        object.__setattr__(self, "atoms", _freeze(np.asarray(self.atoms)))
        object.__setattr__(self, "lambdas", _freeze(np.asarray(self.lambdas)))


def make_finite_pair(mu_weights, nu_weights, z, name: str = "") -> DistributionPair:
    """Pair from explicit weight vectors; weights are validated and
    renormalized exactly at construction."""
    return DistributionPair(
        mu_weights=np.asarray(mu_weights, dtype=np.float64),
        nu_weights=np.asarray(nu_weights, dtype=np.float64),
        z_true=z,
        name=name,
    )


def make_bernoulli_pair(p: float, eps: float, z: float = 1.0) -> DistributionPair:
    """Two-atom pair whose density ratio is 1-eps with proposal mass 1-p
    and 1 + eps*(1/p - 1) with proposal mass p.

    The high atom carries target mass p + eps*(1-p), making small-p
    instances nearly indistinguishable from the proposal itself. At
    p = 1 the pair degenerates to mu = nu.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    if not 0 < eps <= 0.25:
        raise ValueError(f"eps must be in (0, 1/4], got {eps}")
    mu = [1.0 - p, p]
    nu = [(1.0 - p) * (1.0 - eps), p + eps * (1.0 - p)]
    return make_finite_pair(mu, nu, z, name=f"bernoulli(p={p},eps={eps})")


def make_pointmass_pair(q: float, z: float = 1.0) -> DistributionPair:
    """Proposal concentrated on atom 0; target leaks mass q onto an atom
    the proposal never visits. q = 0 gives mu = nu; q = 1 puts the
    entire target outside the proposal's reach."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must be in [0, 1], got {q}")
    return make_finite_pair([1.0, 0.0], [1.0 - q, q], z, name=f"pointmass(q={q})")


def make_twopoint_mu_pair(p: float, z: float = 1.0) -> DistributionPair:
    """Target is a point mass on the atom the proposal hits with
    probability p, so the density ratio is (0, 1/p) and stays bounded by
    4 across the allowed p range."""
    if not 0.25 <= p <= 0.5:
        raise ValueError(f"p must be in [1/4, 1/2], got {p}")
    return make_finite_pair([1.0 - p, p], [0.0, 1.0], z, name=f"twopoint(p={p})")


def make_weighted_pair(pair: DistributionPair, g) -> DistributionPair:
    """Reweight the target by a nonnegative function table ``g``.

    The new target is g*nu normalized by nu_g = E_nu[g]; its density
    ratio is g/nu_g times the old one and its normalizing constant is
    z_true * nu_g, so estimating the new constant estimates the
    integral of g under the old target.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != pair.nu_weights.shape:
        raise ValueError(
            f"g has {g.size} entries, support has {pair.support_size}"
        )
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        raise ValueError("g must be nonnegative and finite")
    nu_g = float(np.dot(pair.nu_weights, g))
    if nu_g <= 0:
        raise ValueError("E_nu[g] = 0; weighted target is undefined")
    return DistributionPair(
        mu_weights=pair.mu_weights.copy(),
        nu_weights=pair.nu_weights * g / nu_g,
        z_true=pair.z_true * nu_g,
        name=f"{pair.name}|weighted" if pair.name else "weighted",
    )


def make_random_pair(support_size: int, seed: int, z: float = 1.0) -> DistributionPair:
    """Seeded random pair with strictly positive weights on both sides.

    Raw weights are uniform on [0.05, 1.05) before normalization, which
    keeps every atom reachable (finite divergences, no singular mass)
    while still spreading the density ratio over about three decades.
    """
    support_size = int(support_size)
    if support_size < 1:
        raise ValueError(f"support_size must be >= 1, got {support_size}")
    gen = make_generator(seed)
    mu_raw = gen.random(support_size) + 0.05
    nu_raw = gen.random(support_size) + 0.05
    return make_finite_pair(
        mu_raw / mu_raw.sum(),
        nu_raw / nu_raw.sum(),
        z,
        name=f"random[{support_size},{seed}]",
    )


def sample(pair: DistributionPair, n: int, seed: int) -> SampleBatch:
    """n i.i.d. proposal draws by inverse CDF over the atom table.

    Deterministic given the 64-bit seed: the same (pair, n, seed)
    triple always yields bit-identical batches.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gen = make_generator(seed)
    cum = np.cumsum(pair.mu_weights)
    u = gen.random(n)
    atoms = np.searchsorted(cum, u, side="right")
    # cum[-1] can round below 1; u can never reach past the last atom.
    np.clip(atoms, 0, pair.support_size - 1, out=atoms)
    lam = pair.lambda_values[atoms]
    return SampleBatch(atoms=atoms.astype(np.int64), lambdas=lam, seed=int(seed), n=n)


def pair_to_dict(pair: DistributionPair) -> dict:
    return {
        "mu": [float(w) for w in pair.mu_weights],
        "nu": [float(w) for w in pair.nu_weights],
        "z": float(pair.z_true),
        "name": pair.name,
    }


def pair_from_dict(doc: dict) -> DistributionPair:
    try:
        return make_finite_pair(doc["mu"], doc["nu"], doc["z"], doc.get("name", ""))
    except KeyError as exc:
        raise ValueError(f"pair document missing field {exc}") from exc


def save_pair(pair: DistributionPair, path) -> None:
    """Write the pair as JSON. repr-based float serialization makes the
    round trip exact to the last bit (beyond 15 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pair_to_dict(pair), fh, indent=2)
        fh.write("\n")


def load_pair(path) -> DistributionPair:
    with open(path, "r", encoding="utf-8") as fh:
        return pair_from_dict(json.load(fh))
