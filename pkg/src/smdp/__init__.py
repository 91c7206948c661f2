"""Finite-horizon decision processes on discrete-time semi-Markov dynamics.

State/age augmentation makes the controlled process Markov on pairs (x, t);
this package provides the factorized kernel model, exact backward-induction
solutions, episode simulation with a time-change cross-check, finite-horizon
tabular Q-learning, and the Monte Carlo metrics pipeline around them.
"""

__version__ = "0.1.0"

from .bellman import (
    Policy,
    QTable,
    ValueTable,
    apply_L,
    brute_force_value,
    constant_policy,
    greedy_policy,
    load_table,
    policy_evaluate,
    policy_from_map,
    save_table,
    solve_bellman,
)
from .coins import CoinsParams, build_coins_env, reference_params
from .core import (
    EnvSpec,
    ExtendedState,
    ReachableSet,
    ValidationReport,
    reachable_index,
    sojourn_of_path,
    stage_reward,
    state_transition_prob,
    terminal_reward,
    transition_prob,
    validate_env,
)
from .envfile import env_hash, read_env, write_env
from .metrics import (
    AggregateSeries,
    MetricsSeries,
    aggregate_series,
    batch_metrics,
    monte_carlo_curves,
)
from .qlearn import (
    LearningSchedule,
    QInit,
    StartRule,
    TrainConfig,
    TrainResult,
    lr,
    sup_error,
    train,
)
from .simulate import (
    EpisodeTrace,
    HmapSpec,
    InterjumpPmf,
    exact_marginal,
    geometric_consistency,
    interjump_pmf,
    run_episode,
    run_episodes,
    simulate_hmap,
    truncated_geometric,
)

__all__ = [name for name in dir() if not name.startswith("_")]
