"""Acceptance criteria, one test per criterion, each printing a PASS line
with its elapsed time and asserting the stated runtime budget.

The full-scale experiment protocol is marked `fullscale` and excluded from
the default run (enable with `pytest -m fullscale`).
"""

import itertools
import time

import numpy as np
import pytest
from scipy import stats as scipy_stats

from smdp import (
    CoinsParams,
    EnvSpec,
    ExtendedState,
    HmapSpec,
    LearningSchedule,
    TrainConfig,
    brute_force_value,
    build_coins_env,
    constant_policy,
    exact_marginal,
    geometric_consistency,
    interjump_pmf,
    monte_carlo_curves,
    policy_evaluate,
    policy_from_map,
    reachable_index,
    run_episodes,
    simulate_hmap,
    solve_bellman,
    sup_error,
    train,
    truncated_geometric,
    validate_env,
)
from smdp.core import check_kernel_properties
from smdp.qlearn import QInit, StartRule
from smdp.rng import replication_seed
from smdp.simulate import chi_square_gof, chi_square_two_sample

from helpers import random_env, random_policy

ORACLE_TOL = 1e-12


class Budget:
    def __init__(self, name, seconds):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            verdict = "PASS" if elapsed < self.seconds else "FAIL (over budget)"
            print(f"[{verdict}] {self.name} ({elapsed:.2f}s / {self.seconds:.0f}s)")
            assert elapsed < self.seconds, f"{self.name}: {elapsed:.2f}s over budget"
        else:
            print(f"[FAIL] {self.name} ({elapsed:.2f}s)")
        return False


def test_oracle_equivalence_policy_evaluation_vs_path_enumeration():
    with Budget("oracle equivalence (20 envs x 5 policies, tol 1e-12)", 5.0):
        rng = np.random.default_rng(2026)
        for k in range(20):
            env = random_env(
                rng,
                n_states=int(rng.integers(1, 4)),
                n_actions=int(rng.integers(1, 3)),
                horizon=int(rng.integers(1, 7)),
                reward_kind="expected-next-state" if k % 4 == 3 else "current-state",
                restrict_admissible=(k % 3 == 0),
            )
            for _ in range(5):
                policy = random_policy(env, rng)
                values = policy_evaluate(env, policy)
                for x in range(env.n_states):
                    direct = brute_force_value(env, policy, ExtendedState(x, 0))
                    assert abs(values.value(0, x, 0) - direct) <= ORACLE_TOL


def test_optimality_exhaustive_and_dominance():
    with Budget("optimality (exhaustive policies + 1000-policy dominance)", 30.0):
        rng = np.random.default_rng(7)
        # exhaustive instances: every deterministic policy on the reachable cells
        envs = [
            build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=n))
            for n in (1, 2, 3)
        ] + [random_env(rng, 2, 2, 3), random_env(rng, 2, 2, 2)]
        for env in envs:
            values, _, _ = solve_bellman(env)
            cells = [(n, x, t) for n in range(env.horizon)
                     for x in range(env.n_states) for t in range(n + 1)]
            best = {x: -np.inf for x in range(env.n_states)}
            for combo in itertools.product(
                *[env.admissible_actions(x, t) for (_n, x, t) in cells]
            ):
                policy = policy_from_map(env, dict(zip(cells, combo)))
                for x in range(env.n_states):
                    best[x] = max(best[x], brute_force_value(env, policy, ExtendedState(x, 0)))
            for x in range(env.n_states):
                assert abs(values.value(0, x, 0) - best[x]) <= ORACLE_TOL

        # cell-wise dominance over sampled policies on the larger instance
        coins6 = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=6))
        values6, _, _ = solve_bellman(coins6)
        for _ in range(1000):
            policy = random_policy(coins6, rng)
            pv = policy_evaluate(coins6, policy)
            for n in range(coins6.horizon + 1):
                assert (values6.stages[n] >= pv.stages[n] - ORACLE_TOL).all()


def test_reachable_count_formula_and_enumeration():
    with Budget("reachable-count (paper instance and small grid)", 1.0):
        assert reachable_index(2, 2, 200).count == 80_400
        for ne in range(1, 4):
            for na in range(1, 4):
                for n in range(1, 7):
                    enumerated = sum(
                        na * ne for stage in range(1, n + 1) for t in range(stage)
                    )
                    assert reachable_index(ne, na, n).count == enumerated


def test_kernel_structure_validation_and_fuzzing():
    with Budget("kernel structure (preset valid, fuzzed violations located)", 1.0):
        coins = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=200))
        assert validate_env(coins).ok

        # normalization violation: jump mass 0.9 at (tails, a1)
        bad_sum = EnvSpec(
            states=coins.states, actions=coins.actions, horizon=coins.horizon,
            stay_prob=coins.stay_prob,
            jump_prob=[[[0.0, 0.9], [0.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]],
            reward_kind=coins.reward_kind, reward_table=coins.reward_table,
            terminal="same-as-reward",
        )
        report = validate_env(bad_sum)
        assert not report.ok
        assert any("jump_prob(x=0/tails, a=0/a1)" in i.location for i in report.issues)

        # bound violation: stay probability above 1 at (heads, a2)
        bad_stay = EnvSpec(
            states=coins.states, actions=coins.actions, horizon=coins.horizon,
            stay_prob=[[[0.8], [0.2]], [[0.2], [1.4]]], jump_prob=coins.jump_prob,
            reward_kind=coins.reward_kind, reward_table=coins.reward_table,
            terminal="same-as-reward",
        )
        report = validate_env(bad_stay)
        assert any("stay_prob(x=1/heads, a=1/a2)" in i.location for i in report.issues)

        # structural violations cannot be expressed in the stay/jump form, so
        # fuzz the induced-kernel checker with planted kernels
        def base(y, s, x, t, a):
            if y == x:
                return 0.7 if s == t + 1 else 0.0
            return 0.3 if s == 0 else 0.0

        def same_state_violation(y, s, x, t, a):
            if (x, t) == (0, 2) and y == x:
                return 0.35 if s in (t + 1, t + 3) else 0.0
            return base(y, s, x, t, a)

        def cross_state_violation(y, s, x, t, a):
            if (x, t) == (1, 1) and y != x:
                return 0.3 if s == 1 else 0.0
            return base(y, s, x, t, a)

        probe = dict(n_states=2, t_values=range(4), s_max=7,
                     actions_at=lambda x, t: (0,))
        assert check_kernel_properties(base, **probe) == []
        issues = check_kernel_properties(same_state_violation, **probe)
        assert any(i.location == "kernel(x=0,t=2,a=0)" and "same-state" in i.message
                   for i in issues)
        issues = check_kernel_properties(cross_state_violation, **probe)
        assert any(i.location == "kernel(x=1,t=1,a=0)" and "cross-state" in i.message
                   for i in issues)


def test_sojourn_bound_and_path_structure():
    with Budget("sojourn bound and path structure (1e5 episodes)", 10.0):
        env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=50))
        policy = solve_bellman(env)[2]
        violations = 0
        for start_x in (0, 1):
            for trace in run_episodes(env, policy, start_x, 50_000, seed=start_x):
                states, ages = trace.states, trace.ages
                if ages[0] != 0:
                    violations += 1
                for n in range(1, len(states)):
                    if ages[n] > n:
                        violations += 1
                    if states[n] == states[n - 1]:
                        if ages[n] != ages[n - 1] + 1:
                            violations += 1
                    elif ages[n] != 0:
                        violations += 1
        assert violations == 0

        # paper-scale spot check at the reference horizon
        env200 = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=200))
        policy200 = solve_bellman(env200)[2]
        for trace in run_episodes(env200, policy200, 0, 2_000, seed=9):
            assert max(t - n for n, t in enumerate(trace.ages)) <= 0


def test_non_markov_certificate():
    with Budget("non-Markov certificate (inter-jump law)", 1.0):
        env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=8))
        alternating = policy_from_map(env, {(0, 0, 0): 0, (1, 0, 1): 1}, default=0)
        pmf = interjump_pmf(env, alternating, 0, 8)
        assert abs(pmf.probs[0] - 0.2) <= ORACLE_TOL
        assert abs(pmf.probs[1] - 0.64) <= ORACLE_TOL  # (1 - p1) * p2
        check = geometric_consistency(pmf)
        assert not check.consistent
        assert check.first_violation == 2

        fair = build_coins_env(CoinsParams(p=(0.5, 0.5), t_cheat=3, r_cheat=-10.0, horizon=8))
        rng = np.random.default_rng(3)
        for _ in range(50):
            policy = random_policy(fair, rng)
            for start_x in (0, 1):
                assert geometric_consistency(interjump_pmf(fair, policy, start_x, 8)).consistent


def test_time_change_equivalence():
    with Budget("time-change equivalence (two samplers + exact law)", 30.0):
        n_samples = 100_000
        horizon = 6
        stages = (1, 3, 5)
        env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0,
                                          horizon=horizon))
        policy = constant_policy(env, 0)

        # kernel sampler
        kernel_counts = {n: np.zeros((2, n + 1)) for n in stages}
        for trace in run_episodes(env, policy, 0, n_samples, seed=11):
            for n in stages:
                kernel_counts[n][trace.states[n], trace.ages[n]] += 1

        # jump-chain sampler: alternation with geometric holding times
        hmap = HmapSpec(
            jump_matrix=[[0.0, 1.0], [1.0, 0.0]],
            sojourn_pmf=[truncated_geometric(0.2, 160), truncated_geometric(0.8, 160)],
            initial_state=0,
        )
        hmap_counts = {n: np.zeros((2, n + 1)) for n in stages}
        for episode in range(n_samples):
            xs, ages = simulate_hmap(hmap, max(stages), seed=12, episode=episode)
            for n in stages:
                hmap_counts[n][xs[n], ages[n]] += 1

        for n in stages:
            exact = exact_marginal(env, policy, 0, n)
            two_sample = chi_square_two_sample(
                kernel_counts[n].reshape(-1), hmap_counts[n].reshape(-1)
            )
            assert two_sample.p_value > 0.01, f"samplers differ at stage {n}"
            for name, counts in (("kernel", kernel_counts[n]), ("hmap", hmap_counts[n])):
                gof = chi_square_gof(counts.reshape(-1), exact.reshape(-1))
                assert gof.p_value > 0.01, f"{name} sampler differs from exact law at {n}"


def test_qlearning_convergence():
    with Budget("Q-learning convergence (2e5 episodes x 20 seeds)", 120.0):
        env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=4))
        reference = solve_bellman(env)[1]
        episodes = 200_000
        checkpoints = [episodes // 10 - 1, episodes // 2 - 1, episodes - 1]
        finals, curves = [], []
        for seed in range(20):
            cfg = TrainConfig(
                episodes=episodes,
                schedule=LearningSchedule.paper_step(),
                epsilon=0.2,
                seed=seed,
            )
            result = train(env, cfg, reference=reference)
            finals.append(sup_error(result.q, reference))
            assert finals[-1] == result.errors[-1]
            curves.append([result.errors[c] for c in checkpoints])
        med = np.median(curves, axis=0)
        assert med[0] > med[1] > med[2], f"checkpoint medians not decreasing: {med}"
        # With eps = 0.2 the deepest heads-run cells are visited ~1e-3 of
        # episodes, so the step schedule leaves them only ~0.4 units of total
        # learning mass over 2e5 episodes; their error cannot contract below
        # ~1 regardless of seed. The same run with eps = 1.0 lands near 0.025.
        assert np.median(finals) < 0.1, (
            f"median final sup-norm error {np.median(finals):.3f} >= 0.1 "
            f"(checkpoint medians {med}; under-visited deep-sojourn cells "
            f"dominate the sup norm at eps=0.2)"
        )


def test_learning_rate_tradeoff():
    with Budget("learning-rate trade-off (alpha 0.3 vs 0.1 early reward)", 180.0):
        env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=20))
        early_means = {}
        for alpha in (0.1, 0.3):
            per_rep = []
            cfg = TrainConfig(
                episodes=2_000,
                schedule=LearningSchedule.constant(alpha),
                epsilon=0.0,
                seed=int(alpha * 1000),
            )
            for r in range(30):
                result = train(env, cfg.with_seed(replication_seed(cfg.seed, r)))
                series = result.rewards[:500].reshape(10, 50).mean(axis=1)
                per_rep.append(series.mean())
            early_means[alpha] = np.asarray(per_rep)
        assert early_means[0.3].mean() > early_means[0.1].mean()
        test = scipy_stats.ttest_ind(
            early_means[0.3], early_means[0.1], equal_var=False, alternative="greater"
        )
        assert test.pvalue < 0.05, f"one-sided p = {test.pvalue}"


@pytest.mark.fullscale
def test_full_scale_experiment_protocol():
    """Reference protocol: horizon 200, 2000 episodes, 100 evaluations,
    batches of 50; increasing trend and eventually non-negative batch
    maxima, both by sign test at 0.05."""
    env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=200))
    cfg = TrainConfig(
        episodes=2_000,
        schedule=LearningSchedule.constant(0.3),
        epsilon=0.0,
        q_init=QInit.uniform(0.0, 1.0),
        start_state=StartRule.uniform(),
        seed=0,
    )
    agg = monte_carlo_curves(env, cfg, replications=100, batch_size=50)

    diffs = np.diff(agg.avg_mean)
    increases = int((diffs > 0).sum())
    trend = scipy_stats.binomtest(increases, diffs.size, 0.5, alternative="greater")
    assert trend.pvalue < 0.05, f"increasing-trend sign test p = {trend.pvalue}"

    late_max = agg.max_mean[6:]
    nonneg = int((late_max >= 0).sum())
    sign = scipy_stats.binomtest(nonneg, late_max.size, 0.5, alternative="greater")
    assert sign.pvalue < 0.05, f"non-negative-max sign test p = {sign.pvalue}"
    print(f"[PASS] full-scale protocol (trend p={trend.pvalue:.2g}, "
          f"non-negative p={sign.pvalue:.2g})")
