"""The switching-uneven-coins environment.

A two-state chain (tails = 0, heads = 1) where each action is a coin with
its own heads probability. Staying on tails too long triggers a large
penalty, so the reward depends on the sojourn age and the optimal play may
switch coins mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import REWARD_CURRENT_STATE, EnvSpec

TAILS = 0
HEADS = 1


@dataclass(frozen=True)
class CoinsParams:
    """Per-coin heads probabilities, the tails-run tolerance t_cheat, the
    penalty r_cheat applied beyond it (expected < 0), and the horizon."""

    p: tuple[float, ...]
    t_cheat: int
    r_cheat: float
    horizon: int

    def __post_init__(self):
        if len(self.p) < 1:
            raise ValueError("need at least one coin")
        for i, pi in enumerate(self.p):
            if not (0.0 <= pi <= 1.0):
                raise ValueError(f"coin {i} has heads probability {pi} outside [0, 1]")
        if self.t_cheat < 0:
            raise ValueError("t_cheat must be >= 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def reference_params(horizon: int = 200) -> CoinsParams:
    """The reference parameterization: p = (1/5, 4/5), t_cheat = 3, r_cheat = -10."""
    return CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=horizon)


def _reward_rows(t_cheat: int, r_cheat: float) -> list[list[float]]:
    return [
        [1.0] * (t_cheat + 1) + [float(r_cheat)],  # tails: +1 up to t_cheat, then penalty
        [-1.0],                                    # heads: always -1
    ]


def reward_tables_from_rule(rule: dict, states) -> list[list[float]]:
    """Expand the compact reward rule form used in env files."""
    if not isinstance(rule, dict) or rule.get("type") != "coins":
        raise ValueError(f"unsupported reward rule {rule!r}")
    if len(states) != 2:
        raise ValueError("coins reward rule requires exactly two states")
    t_cheat = int(rule["t_cheat"])
    r_cheat = float(rule["r_cheat"])
    if t_cheat < 0:
        raise ValueError("t_cheat must be >= 0")
    return _reward_rows(t_cheat, r_cheat)


def build_coins_env(params: CoinsParams) -> EnvSpec:
    """EnvSpec for the coins game.

    Tossing coin i: from tails, heads comes up with probability p_i (a jump);
    from heads, heads again with probability p_i (a stay). All coins are
    admissible everywhere, and the terminal reward reuses the running reward
    so an episode's total equals the sum of r over all visited states.
    """
    m = len(params.p)
    stay = [
        [[1.0 - pi] for pi in params.p],  # tails: stay on tails unless heads comes up
        [[pi] for pi in params.p],        # heads: stay on heads while it keeps coming up
    ]
    jump = [
        [[0.0, 1.0] for _ in range(m)],
        [[1.0, 0.0] for _ in range(m)],
    ]
    return EnvSpec(
        states=("tails", "heads"),
        actions=tuple(f"a{i + 1}" for i in range(m)),
        horizon=params.horizon,
        stay_prob=stay,
        jump_prob=jump,
        reward_kind=REWARD_CURRENT_STATE,
        reward_table=_reward_rows(params.t_cheat, params.r_cheat),
        terminal="same-as-reward",
    )
