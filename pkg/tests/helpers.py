"""Shared builders for randomized environments and policies."""

from __future__ import annotations

import numpy as np

from smdp import EnvSpec, Policy
from smdp.bellman import Policy as _Policy
from smdp.core import REWARD_CURRENT_STATE


def random_env(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    horizon: int,
    reward_kind: str = REWARD_CURRENT_STATE,
    restrict_admissible: bool = False,
) -> EnvSpec:
    """A valid random environment with age-dependent stay probabilities."""
    states = [f"s{i}" for i in range(n_states)]
    actions = [f"a{i}" for i in range(n_actions)]
    stay = []
    jump = []
    for x in range(n_states):
        stay_row, jump_row = [], []
        for a in range(n_actions):
            depth = int(rng.integers(1, 4))
            stay_row.append(rng.uniform(0.05, 0.95, size=depth).tolist())
            if n_states == 1:
                stay_row[-1] = [1.0] * depth
                jump_row.append([0.0])
            else:
                w = rng.uniform(0.1, 1.0, size=n_states)
                w[x] = 0.0
                w /= w.sum()
                jump_row.append(w.tolist())
        stay.append(stay_row)
        jump.append(jump_row)

    if reward_kind == REWARD_CURRENT_STATE:
        reward = [
            rng.uniform(-2.0, 2.0, size=int(rng.integers(1, 4))).tolist()
            for _ in range(n_states)
        ]
    else:
        t_depth = int(rng.integers(1, 3))
        reward = rng.uniform(-2.0, 2.0, size=(horizon, n_states, t_depth, n_actions, n_states))
    terminal = [
        rng.uniform(-2.0, 2.0, size=int(rng.integers(1, 3))).tolist()
        for _ in range(n_states)
    ]

    admissible = None
    if restrict_admissible and n_actions > 1:
        admissible = {}
        for x in range(n_states):
            for t in range(horizon):
                if rng.random() < 0.3:
                    keep = sorted(
                        rng.choice(n_actions, size=int(rng.integers(1, n_actions + 1)),
                                   replace=False).tolist()
                    )
                    admissible[(x, t)] = tuple(int(a) for a in keep)

    return EnvSpec(
        states=states,
        actions=actions,
        horizon=horizon,
        stay_prob=stay,
        jump_prob=jump,
        reward_kind=reward_kind,
        reward_table=reward,
        terminal=terminal,
        admissible=admissible,
    )


def random_policy(env: EnvSpec, rng: np.random.Generator) -> Policy:
    stages = []
    for n in range(env.horizon):
        arr = np.zeros((env.n_states, n + 1), dtype=np.int64)
        for x in range(env.n_states):
            for t in range(n + 1):
                acts = env.admissible_actions(x, t)
                arr[x, t] = acts[int(rng.integers(len(acts)))]
        stages.append(arr)
    return _Policy(env.horizon, env.n_states, stages)


def all_stay_env(horizon: int, n_states: int = 2, n_actions: int = 2,
                 rewards=None, terminal=None) -> EnvSpec:
    """Deterministic env: every action stays forever (ages just count up)."""
    rewards = rewards if rewards is not None else [[1.0], [-0.5]][:n_states]
    terminal = terminal if terminal is not None else [[0.5], [0.25]][:n_states]
    return EnvSpec(
        states=[f"s{i}" for i in range(n_states)],
        actions=[f"a{i}" for i in range(n_actions)],
        horizon=horizon,
        stay_prob=[[[1.0]] * n_actions for _ in range(n_states)],
        jump_prob=[[[0.0] * n_states] * n_actions for _ in range(n_states)],
        reward_kind=REWARD_CURRENT_STATE,
        reward_table=rewards,
        terminal=terminal,
    )
