"""The action-value network: 3 inputs, dense ReLU hidden stack, softmax
outputs (one per action), mean-squared-error loss, Adam."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .config import NetConfig


def _mlp(cfg: NetConfig, n_actions: int) -> nn.Sequential:
    layers: list[nn.Module] = [nn.Linear(3, cfg.nn), nn.ReLU()]
    for _ in range(cfg.nhl - 1):
        layers += [nn.Linear(cfg.nn, cfg.nn), nn.ReLU()]
    layers += [nn.Linear(cfg.nn, n_actions), nn.Softmax(dim=-1)]
    return nn.Sequential(*layers)


@dataclass
class NetworkPair:
    """Online model plus its lagged copy used for bootstrap predictions."""

    model: nn.Sequential
    target: nn.Sequential

    def sync(self) -> None:
        self.target.load_state_dict(self.model.state_dict())


def build_network(cfg: NetConfig, n_actions: int) -> NetworkPair:
    if n_actions < 1:
        raise ValueError("need at least one action output")
    model = _mlp(cfg, n_actions)
    target = _mlp(cfg, n_actions)
    pair = NetworkPair(model=model, target=target)
    pair.sync()
    for p in target.parameters():
        p.requires_grad_(False)
    return pair


def parameter_count(cfg: NetConfig, n_actions: int) -> int:
    """Dense-with-bias parameter total, layer by layer."""
    total = 3 * cfg.nn + cfg.nn
    total += (cfg.nhl - 1) * (cfg.nn * cfg.nn + cfg.nn)
    total += cfg.nn * n_actions + n_actions
    return total


def make_optimizer(pair: NetworkPair) -> torch.optim.Adam:
    return torch.optim.Adam(pair.model.parameters())
