import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgpaths.losses import (
    LossWeights,
    anneal,
    bce,
    infonce,
    pi_map_ce,
    rl_reward,
    total_loss,
)


def test_infonce_closed_forms():
    assert infonce(0.5, [0.5], temperature=0.3) == pytest.approx(math.log(2))
    assert infonce(20.0, [0.0], temperature=1.0) < 1e-8
    assert infonce(1.0, [0.0], temperature=1.0) == pytest.approx(
        -math.log(math.e / (math.e + 1)))


def test_infonce_validation():
    with pytest.raises(ValueError):
        infonce(1.0, [], temperature=1.0)
    with pytest.raises(ValueError):
        infonce(1.0, [0.0], temperature=0.0)


@given(st.floats(-5, 5), st.floats(-5, 5),
       st.lists(st.floats(-5, 5), min_size=1, max_size=5))
def test_infonce_strictly_decreasing_in_positive(lo, delta, negs):
    hi = lo + abs(delta) + 1e-3
    assert infonce(hi, negs) < infonce(lo, negs)


def test_bce_closed_forms():
    assert bce(0.5, 0) == pytest.approx(math.log(2))
    assert bce(0.5, 1) == pytest.approx(math.log(2))
    assert bce(1 - 1e-12, 1) == pytest.approx(0.0, abs=1e-9)
    assert bce(0.9, 0) == pytest.approx(-math.log(0.1))
    # clamping keeps the loss finite at the boundary
    assert math.isfinite(bce(0.0, 1))
    with pytest.raises(ValueError):
        bce(0.5, 2)


def test_total_loss_weighted_sum():
    assert total_loss({"ans": 0.4}, LossWeights(0, 0, 0, 0)) == 0.4
    ones = {k: 1.0 for k in ("ans", "nce", "ver", "reg", "align")}
    assert total_loss(ones, LossWeights(1, 1, 1, 1)) == 5.0
    assert total_loss({"ans": 0.2, "nce": 0.3},
                      LossWeights(lambda_nce=0.5, lambda_ver=0, lambda_reg=0,
                                  lambda_align=0)) == pytest.approx(0.35)
    with pytest.raises(ValueError):
        total_loss({"ans": float("inf")}, LossWeights())


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(lambda_nce=-1)
    with pytest.raises(ValueError):
        LossWeights(tau_e=0)


def test_rl_reward_closed_forms():
    assert rl_reward(1.0, 0, 10, 0.5, 0, 1.0) == 1.0
    assert rl_reward(0.8, 2, 10, 0.5, 0, 0.0) == pytest.approx(0.7)
    assert rl_reward(0.0, 0, 10, 0.5, 1, 1.0) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        rl_reward(1.0, 0, 0, 0.5, 0, 1.0)
    with pytest.raises(ValueError):
        rl_reward(1.0, 0, 10, 0.5, 2, 1.0)


@given(st.integers(0, 10), st.integers(0, 10))
def test_rl_reward_monotone_in_edits(e1, e2):
    lo, hi = sorted((e1, e2))
    assert rl_reward(0.5, hi, 20, 0.3, 0, 0) <= rl_reward(0.5, lo, 20, 0.3, 0, 0)


def test_anneal_schedule():
    assert anneal(0, 2.0, 3.0) == 0.0
    assert anneal(3.0, 2.0, 3.0) == pytest.approx(2.0 * (1 - 1 / math.e))
    assert anneal(60.0, 2.0, 3.0) == pytest.approx(2.0, abs=1e-6)
    # monotone nondecreasing, bounded by lambda_max
    values = [anneal(e, 2.0, 3.0) for e in range(30)]
    assert values == sorted(values)
    assert all(v < 2.0 for v in values)
    with pytest.raises(ValueError):
        anneal(-1, 1.0, 1.0)
    with pytest.raises(ValueError):
        anneal(1, 1.0, 0.0)


def test_pi_map_ce():
    assert pi_map_ce([0.25] * 4, 2) == pytest.approx(math.log(4))
    assert pi_map_ce([0.0, 1.0], 1) == pytest.approx(0.0)
    assert pi_map_ce([0.7, 0.2, 0.1], 1) == pytest.approx(-math.log(0.2))
    # zero probability at the oracle index is clamped, not infinite
    assert math.isfinite(pi_map_ce([0.0, 1.0], 0))
    with pytest.raises(ValueError):
        pi_map_ce([0.5, 0.4], 0)
    with pytest.raises(ValueError):
        pi_map_ce([0.5, 0.5], 5)
