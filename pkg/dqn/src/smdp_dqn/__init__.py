"""Deep Q-network companion to the smdp toolkit.

Approximates the stage-indexed action-value function with a small dense
network over inputs (stage, state, age), trained from replayed transitions
against a lagged target network. Interaction with the tabular toolkit is
file-based only: env files in, rewards/metrics CSVs out.
"""

__version__ = "0.1.0"

from .config import NetConfig, ReplayMemory, ReplayStats
from .envfile import EnvModel, read_env_model
from .metrics import aggregate_runs, batch_curve, write_metrics_csv, write_rewards_csv
from .net import NetworkPair, build_network, parameter_count
from .train import DqnResult, dqn_train

__all__ = [
    "NetConfig",
    "ReplayMemory",
    "ReplayStats",
    "EnvModel",
    "read_env_model",
    "NetworkPair",
    "build_network",
    "parameter_count",
    "DqnResult",
    "dqn_train",
    "batch_curve",
    "aggregate_runs",
    "write_rewards_csv",
    "write_metrics_csv",
]
