"""Deterministic random-number generation.

All randomness flows through counter-based Philox generators keyed by a
64-bit seed, so identical seeds produce identical streams across
platforms and runs. Parallel trials never share a stream: each derives
its own seed with ``derive_seed``.
"""

from __future__ import annotations

import numpy as np

_SEED_BOUND = 2**64


def make_generator(seed: int) -> np.random.Generator:
    """Return a Generator over a Philox stream keyed by ``seed``."""
    seed = int(seed)
    if not 0 <= seed < _SEED_BOUND:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def derive_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit seed for the ``index``-th independent sub-stream.

    Hashing (master_seed, index) through SeedSequence keeps sub-streams
    decorrelated while staying reproducible regardless of how many
    workers consume them or in which order.
    """
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def standard_exponential(gen: np.random.Generator, size) -> np.ndarray:
    """Exp(1) variates as -log(1 - U) with U uniform on [0, 1).

    1 - U lies in (0, 1], so the result is always finite.
    """
    return -np.log1p(-gen.random(size))
