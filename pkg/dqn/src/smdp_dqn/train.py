"""The training loop.

Each episode rolls the environment forward taking the argmax of the online
network at (stage, state, age); transitions go into the replay buffer, and
once it holds ``min_replay`` entries every environment step fits the model
on a uniformly sampled batch. Bootstrap values come from the lagged target
network (the stored terminal value for end-of-horizon transitions), and
scalar targets are min-max rescaled per batch into the softmax output
range; action selection only compares outputs, so the rescaling does not
affect the induced policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .config import NetConfig, ReplayMemory, ReplayStats
from .envfile import EnvModel
from .net import NetworkPair, build_network, make_optimizer


@dataclass
class DqnResult:
    rewards: np.ndarray
    stats: ReplayStats
    networks: NetworkPair


def _fit(pair, optimizer, loss_fn, replay, rng, batch_size, n_inv, stats, sync_every):
    idx = replay.sample_indices(rng, batch_size)
    rows = [replay[int(i)] for i in idx]
    # rows: (n, x, t, a, r, x2, t2, terminal_flag, terminal_value)
    feats = torch.tensor(
        [(r[0] * n_inv, float(r[1]), r[2] * n_inv) for r in rows], dtype=torch.float32
    )
    next_feats = torch.tensor(
        [((r[0] + 1) * n_inv, float(r[5]), r[6] * n_inv) for r in rows],
        dtype=torch.float32,
    )
    actions = torch.tensor([r[3] for r in rows], dtype=torch.int64)
    rewards = torch.tensor([r[4] for r in rows], dtype=torch.float64)
    terminal = torch.tensor([r[7] for r in rows], dtype=torch.bool)
    terminal_value = torch.tensor([r[8] for r in rows], dtype=torch.float64)

    with torch.no_grad():
        bootstrap = pair.target(next_feats).max(dim=1).values.double()
    raw = rewards + torch.where(terminal, terminal_value, bootstrap)
    lo, hi = raw.min(), raw.max()
    if hi > lo:
        scaled = (raw - lo) / (hi - lo)
    else:
        scaled = torch.full_like(raw, 0.5)

    pred = pair.model(feats)
    target = pred.detach().clone()
    target[torch.arange(len(rows)), actions] = scaled.float()
    optimizer.zero_grad()
    loss = loss_fn(pred, target)
    loss.backward()
    optimizer.step()

    stats.fits += 1
    if stats.len_at_first_fit is None:
        stats.len_at_first_fit = len(replay)
    if stats.fits % sync_every == 0:
        pair.sync()
        stats.target_syncs += 1
        stats.sync_fit_indices.append(stats.fits)


def dqn_train(
    env: EnvModel,
    cfg: NetConfig,
    seed: int = 0,
    epsilon: float = 0.0,
) -> DqnResult:
    """Train for ``cfg.episodes`` episodes and return per-episode totals.

    Greedy action selection by default; ``epsilon`` adds uniform
    exploration. All randomness (weights, start states, transitions,
    replay sampling) derives from ``seed``.
    """
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError(f"epsilon {epsilon} outside [0, 1]")
    torch.manual_seed(seed)
    rng = np.random.default_rng([seed & (2**63 - 1), 0x5D9])
    pair = build_network(cfg, env.n_actions)
    optimizer = make_optimizer(pair)
    loss_fn = torch.nn.MSELoss()
    replay = ReplayMemory(cfg.replay_capacity)
    stats = ReplayStats()

    horizon = env.horizon
    n_inv = 1.0 / horizon
    ne = env.n_states
    rewards = np.empty(cfg.episodes)
    feats = torch.empty((1, 3), dtype=torch.float32)

    for m in range(cfg.episodes):
        x = int(rng.integers(ne))
        t = 0
        total = 0.0
        for n in range(horizon):
            if epsilon > 0.0 and rng.random() < epsilon:
                a = int(rng.integers(env.n_actions))
            else:
                feats[0, 0] = n * n_inv
                feats[0, 1] = float(x)
                feats[0, 2] = t * n_inv
                with torch.no_grad():
                    a = int(pair.model(feats).argmax())
            r = env.reward(n, x, t, a)
            total += r
            x2, t2 = env.step(x, t, a, rng.random(), rng.random())
            is_terminal = n == horizon - 1
            replay.push((
                n, x, t, a, r, x2, t2, is_terminal,
                env.terminal(x2, t2) if is_terminal else 0.0,
            ))
            stats.pushes += 1
            if len(replay) > stats.max_len:
                stats.max_len = len(replay)
            if len(replay) >= cfg.min_replay:
                _fit(pair, optimizer, loss_fn, replay, rng, cfg.batch_size,
                     n_inv, stats, cfg.target_update_period)
            x, t = x2, t2
        total += env.terminal(x, t)
        rewards[m] = total

    return DqnResult(rewards=rewards, stats=stats, networks=pair)
