import numpy as np
import pytest

from smdp import (
    CoinsParams,
    ExtendedState,
    build_coins_env,
    constant_policy,
    geometric_consistency,
    interjump_pmf,
    reference_params,
    policy_from_map,
    reachable_index,
    solve_bellman,
    stage_reward,
    transition_prob,
    validate_env,
)

from helpers import random_policy


def test_reference_params_is_valid_with_expected_cell_count():
    env = build_coins_env(reference_params())
    assert env.horizon == 200
    assert validate_env(env).ok
    assert reachable_index(env.n_states, env.n_actions, env.horizon).count == 80_400


def test_kernel_matches_the_four_rules():
    env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=6))
    for i, p in enumerate((0.2, 0.8)):
        for t in range(4):
            assert transition_prob(env, ExtendedState(0, t), i, ExtendedState(1, 0)) == \
                pytest.approx(p, abs=1e-12)
            assert transition_prob(env, ExtendedState(0, t), i, ExtendedState(0, t + 1)) == \
                pytest.approx(1 - p, abs=1e-12)
            assert transition_prob(env, ExtendedState(1, t), i, ExtendedState(1, t + 1)) == \
                pytest.approx(p, abs=1e-12)
            assert transition_prob(env, ExtendedState(1, t), i, ExtendedState(0, 0)) == \
                pytest.approx(1 - p, abs=1e-12)


def test_reward_boundary_is_strict_in_t_cheat():
    env = build_coins_env(CoinsParams(p=(0.5,), t_cheat=3, r_cheat=-10.0, horizon=8))
    assert stage_reward(env, 0, ExtendedState(0, 3), 0) == 1.0
    assert stage_reward(env, 0, ExtendedState(0, 4), 0) == -10.0
    for t in range(8):
        assert stage_reward(env, 0, ExtendedState(1, t), 0) == -1.0


def test_single_fair_coin_interjump_is_geometric():
    env = build_coins_env(CoinsParams(p=(0.5,), t_cheat=2, r_cheat=-5.0, horizon=10))
    pol = constant_policy(env, 0)
    pmf = interjump_pmf(env, pol, 0, 10)
    expected = 0.5 ** np.arange(1, 11)
    assert np.allclose(pmf.probs, expected, atol=1e-14)
    assert geometric_consistency(pmf).consistent


def test_equal_coins_value_matches_single_coin_env():
    two = build_coins_env(CoinsParams(p=(0.35, 0.35), t_cheat=2, r_cheat=-4.0, horizon=5))
    one = build_coins_env(CoinsParams(p=(0.35,), t_cheat=2, r_cheat=-4.0, horizon=5))
    v_two = solve_bellman(two)[0]
    v_one = solve_bellman(one)[0]
    for n in range(6):
        assert np.array_equal(v_two.stages[n], v_one.stages[n])


def test_equal_coins_interjump_geometric_under_every_sampled_policy():
    env = build_coins_env(CoinsParams(p=(0.5, 0.5), t_cheat=3, r_cheat=-10.0, horizon=8))
    rng = np.random.default_rng(9)
    for _ in range(20):
        pol = random_policy(env, rng)
        for start in (0, 1):
            assert geometric_consistency(interjump_pmf(env, pol, start, 8)).consistent


def test_unequal_coins_have_a_non_geometric_certificate_policy():
    env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=8))
    alternating = policy_from_map(env, {(0, 0, 0): 0, (1, 0, 1): 1}, default=0)
    check = geometric_consistency(interjump_pmf(env, alternating, 0, 8))
    assert not check.consistent
    assert check.first_violation == 2


def test_empty_coin_list_rejected():
    with pytest.raises(ValueError, match="at least one coin"):
        CoinsParams(p=(), t_cheat=3, r_cheat=-10.0, horizon=5)


def test_bad_probability_rejected():
    with pytest.raises(ValueError, match="outside"):
        CoinsParams(p=(0.2, 1.3), t_cheat=3, r_cheat=-10.0, horizon=5)
