import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smdp_dqn import EnvModel


def coins_dict(p, t_cheat=3, r_cheat=-10.0, horizon=50):
    """A coins env in the canonical file layout."""
    actions = [f"a{i + 1}" for i in range(len(p))]
    return {
        "format_version": 1,
        "states": ["tails", "heads"],
        "actions": actions,
        "horizon": horizon,
        "kernel": {
            "stay_prob": {
                "tails": {a: [1.0 - pi] for a, pi in zip(actions, p)},
                "heads": {a: [pi] for a, pi in zip(actions, p)},
            },
            "jump_prob": {
                "tails": {a: {"heads": 1.0} for a in actions},
                "heads": {a: {"tails": 1.0} for a in actions},
            },
        },
        "reward": {
            "kind": "current-state",
            "rule": {"type": "coins", "p": list(p), "t_cheat": t_cheat,
                     "r_cheat": r_cheat},
        },
        "terminal": "same-as-reward",
    }


@pytest.fixture
def coins_env():
    return EnvModel.from_dict(coins_dict((0.2, 0.8), horizon=50))


@pytest.fixture
def zero_env():
    d = coins_dict((0.3, 0.7), horizon=20)
    d["reward"] = {"kind": "current-state",
                   "table": {"tails": [0.0], "heads": [0.0]}}
    d["terminal"] = {"tails": [0.0], "heads": [0.0]}
    return EnvModel.from_dict(d)
