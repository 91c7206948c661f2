import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smdp import CoinsParams, build_coins_env


@pytest.fixture
def coins_paper():
    """The reference parameterization at full horizon."""
    return build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=200))


@pytest.fixture
def coins_small():
    """Same coins parameters at a horizon small enough for path enumeration."""
    return build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=4))
