import math

import numpy as np
import pytest

from pfest import (
    AllNullDrawsError,
    astar_sample,
    empirical_tv,
    make_twopoint_mu_pair,
    plan_n_sampling,
    run_races,
)
from pfest.sampler import RaceSummary


def test_identity_race_first_draw(identity_pair):
    """With a constant density the scores are the raw arrival times,
    which increase, so the first draw always wins."""
    for seed in (0, 1, 7, 123):
        atom, state = astar_sample(identity_pair, 5, seed)
        assert state.best_index == 0
        assert atom == state.atoms[0]
        assert state.best_score == state.scores[0]


def test_race_state_contents(bern):
    atom, state = astar_sample(bern, 8, 42)
    assert state.atoms.shape == (8,)
    assert np.all(np.diff(state.arrivals) > 0)
    np.testing.assert_allclose(
        state.scores, state.arrivals / bern.lambda_values[state.atoms], rtol=1e-15
    )
    assert state.best_score == state.scores.min()
    assert atom == state.atoms[np.argmin(state.scores)]


def test_null_atoms_get_infinite_scores(twopoint):
    # find a seed whose draws include the zero-density atom
    for seed in range(50):
        try:
            atom, state = astar_sample(twopoint, 6, seed)
        except AllNullDrawsError:
            continue
        if (state.atoms == 0).any():
            break
    assert np.all(np.isinf(state.scores[state.atoms == 0]))
    assert atom == 1


def test_all_null_draws_raise(twopoint):
    # seed 0 puts all three draws on the zero-density atom
    with pytest.raises(AllNullDrawsError):
        astar_sample(twopoint, 3, 0)


def test_winner_invariant_under_scaling():
    base = make_twopoint_mu_pair(0.25)
    scaled = make_twopoint_mu_pair(0.25, z=7.0)

    def outcome(pair, seed):
        try:
            return astar_sample(pair, 6, seed)[0]
        except AllNullDrawsError:
            return None

    for seed in range(40):
        assert outcome(base, seed) == outcome(scaled, seed)


def test_plan_anchors():
    assert plan_n_sampling(1.0, 0.3) == 5
    assert plan_n_sampling(4.0, 0.03) == 37
    assert plan_n_sampling(4.0, 0.1) == math.ceil(8 * math.log(30.0)) == 28
    # log(3/eps) can vanish; the plan never drops below one race draw
    assert plan_n_sampling(1.0, 2.9) == 1


def test_plan_validation():
    with pytest.raises(ValueError):
        plan_n_sampling(1.0, 3.0)
    with pytest.raises(ValueError):
        plan_n_sampling(1.0, 0.0)
    with pytest.raises(ValueError):
        plan_n_sampling(0.5, 0.3)


def test_run_races_deterministic(bern):
    a = run_races(bern, 6, 5000, 99)
    b = run_races(bern, 6, 5000, 99)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.null_races == b.null_races
    c = run_races(bern, 6, 5000, 100)
    assert (a.counts != c.counts).any()


def test_run_races_accounting(twopoint):
    summary = run_races(twopoint, 2, 4000, 7)
    assert summary.counts.sum() + summary.null_races == 4000
    # the zero-density atom can never win
    assert summary.counts[0] == 0
    assert summary.null_races > 0
    assert summary.n_per_race == 2


def test_empirical_tv_manual(bern):
    summary = RaceSummary(
        counts=np.array([600, 300]), null_races=100, trials=1000, n_per_race=5
    )
    # 0.5 * (|0.6 - 0.375| + |0.3 - 0.625| + 0.1)
    assert empirical_tv(summary, bern) == pytest.approx(0.325, rel=1e-14)


def test_empirical_tv_converges(bern):
    n = plan_n_sampling(1.25, 0.03)
    assert n == 12
    summary = run_races(bern, n, 20_000, 20260814)
    tv_hat = empirical_tv(summary, bern)
    assert tv_hat <= 0.03 + 3 * math.sqrt(2 / 20_000)
