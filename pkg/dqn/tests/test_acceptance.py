"""Acceptance checks: replay/target plumbing invariants on a smoke run,
and the batch-size ordering on the 50-step coins game."""

import time

import numpy as np
import pytest

from smdp_dqn import EnvModel, NetConfig, batch_curve, dqn_train

from conftest import coins_dict


def test_plumbing_invariants_smoke_run():
    t0 = time.perf_counter()
    # horizon 200 -> 10,000 transitions over 50 episodes, enough to fill the
    # 5000-slot buffer and run thousands of fits past the 4000-entry gate
    env = EnvModel.from_dict(coins_dict((0.2, 0.8), horizon=200))
    cfg = NetConfig(nhl=2, nn=16, batch_size=32, episodes=50,
                    replay_capacity=5000, min_replay=4000,
                    target_update_period=100)
    result = dqn_train(env, cfg, seed=0)
    stats = result.stats

    assert stats.pushes == 50 * 200
    assert stats.max_len <= 5000
    assert stats.max_len == 5000  # capacity reached, never exceeded
    assert stats.len_at_first_fit == 4000  # no fit before the gate
    assert stats.fits == stats.pushes - 4000 + 1  # one fit per step after it
    # target refresh exactly every 100 fits
    assert stats.sync_fit_indices == list(range(100, stats.fits + 1, 100))
    assert stats.target_syncs == stats.fits // 100

    elapsed = time.perf_counter() - t0
    print(f"[PASS] replay/target plumbing invariants ({elapsed:.1f}s / 120s)")
    assert elapsed < 120.0


@pytest.mark.acceptance
def test_batch_size_ordering_on_coins():
    t0 = time.perf_counter()
    env = EnvModel.from_dict(coins_dict((0.2, 0.8), t_cheat=3, r_cheat=-10.0,
                                        horizon=50))
    episodes, seeds = 600, (0, 1, 2, 3, 4)
    final5 = {}
    for bs in (100, 500):
        cfg = NetConfig(nhl=3, nn=128, batch_size=bs, episodes=episodes)
        per_seed = []
        for seed in seeds:
            result = dqn_train(env, cfg, seed=seed)
            avg, _lo, _hi = batch_curve(result.rewards, 50)
            per_seed.append(float(avg[-5:].mean()))
        final5[bs] = per_seed
    wins = sum(1 for a, b in zip(final5[500], final5[100]) if a >= b)
    elapsed = time.perf_counter() - t0
    print(f"[{'PASS' if wins >= 4 else 'FAIL'}] batch-size ordering "
          f"(500 >= 100 in {wins}/5 seeds; {elapsed:.0f}s / 1800s)")
    print(f"  final-5-batch means bs=500: {np.round(final5[500], 2).tolist()}")
    print(f"  final-5-batch means bs=100: {np.round(final5[100], 2).tolist()}")
    assert wins >= 4, f"larger batch won only {wins}/5 seeds"
    assert elapsed < 1800.0
