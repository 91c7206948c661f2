"""Finite-horizon tabular Q-learning with stage-indexed tables.

Each episode rolls a trajectory forward choosing actions epsilon-greedily
on the current table, then applies the stochastic-approximation update to
exactly the visited cells. All targets read the table as it stood at the
start of the episode: stage n's target looks one stage ahead, and a stage
is never written before every target that reads it has been formed, so the
single forward pass below is equivalent to sampling first and updating
n = N-1..0 afterwards. The update is applied in increment form
q + a*(y - q), which makes a zero temporal difference an exact no-op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bellman import QTable
from .core import EnvSpec
from .rng import INIT_STREAM, TRAIN_STREAM, stream_generator

_CHUNK_FLOATS = 1 << 16  # episodes are drawn in blocks of this many uniforms


@dataclass(frozen=True)
class LearningSchedule:
    """Learning-rate sequence. ``constant`` holds one rate (the bounded-error
    regime needs it in (0, 1); the degenerate endpoints are accepted for
    diagnostics). ``paper-step`` is the piecewise rate 1/(ceil((m+1)/100)+1).
    ``custom-table`` reuses its final entry once exhausted."""

    kind: str
    alpha: float = 0.0
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not (0.0 <= self.alpha <= 1.0):
                raise ValueError(f"constant rate {self.alpha} outside [0, 1]")
        elif self.kind == "custom-table":
            if not self.table:
                raise ValueError("custom-table schedule needs a non-empty table")
            for i, a in enumerate(self.table):
                if not (0.0 <= a <= 1.0):
                    raise ValueError(f"table entry {i} is {a}, outside [0, 1]")
        elif self.kind != "paper-step":
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, alpha: float) -> "LearningSchedule":
        return cls(kind="constant", alpha=alpha)

    @classmethod
    def paper_step(cls) -> "LearningSchedule":
        return cls(kind="paper-step")

    @classmethod
    def custom(cls, table) -> "LearningSchedule":
        return cls(kind="custom-table", table=tuple(float(a) for a in table))


def lr(schedule: LearningSchedule, m: int) -> float:
    """Learning rate at episode m."""
    if m < 0:
        raise ValueError("episode index must be >= 0")
    if schedule.kind == "constant":
        return schedule.alpha
    if schedule.kind == "paper-step":
        return 1.0 / ((m + 100) // 100 + 1)
    return schedule.table[min(m, len(schedule.table) - 1)]


@dataclass(frozen=True)
class QInit:
    """Initial table fill: per-cell uniform draws or a constant."""

    kind: str
    low: float = 0.0
    high: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind == "uniform":
            if not (math.isfinite(self.low) and math.isfinite(self.high)):
                raise ValueError("uniform bounds must be finite")
            if self.high < self.low:
                raise ValueError("uniform bounds out of order")
        elif self.kind == "constant":
            if not math.isfinite(self.value):
                raise ValueError("constant fill must be finite")
        else:
            raise ValueError(f"unknown init kind {self.kind!r}")

    @classmethod
    def uniform(cls, low: float = 0.0, high: float = 1.0) -> "QInit":
        return cls(kind="uniform", low=low, high=high)

    @classmethod
    def constant(cls, value: float) -> "QInit":
        return cls(kind="constant", value=value)


@dataclass(frozen=True)
class StartRule:
    """Episode start state: uniform over all states or one fixed state.
    The start age is always 0."""

    kind: str
    x0: int = 0

    @classmethod
    def uniform(cls) -> "StartRule":
        return cls(kind="uniform")

    @classmethod
    def fixed(cls, x0: int) -> "StartRule":
        return cls(kind="fixed", x0=int(x0))

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed"):
            raise ValueError(f"unknown start rule {self.kind!r}")


@dataclass(frozen=True)
class TrainConfig:
    episodes: int
    schedule: LearningSchedule
    epsilon: float = 0.0
    q_init: QInit = QInit.uniform(0.0, 1.0)
    start_state: StartRule = StartRule.uniform()
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon {self.epsilon} outside [0, 1]")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)


@dataclass
class TrainResult:
    """Final table, per-episode totals, and the per-episode sup-norm error
    against a reference table when one was supplied."""

    q: QTable
    rewards: np.ndarray
    errors: np.ndarray | None


def _flat_tables(env: EnvSpec, config: TrainConfig, initial_q: QTable | None):
    """Learned stages as flat lists, index (x*(n+1) + t)*n_actions + a."""
    horizon, ne, na = env.horizon, env.n_states, env.n_actions
    sizes = [ne * (n + 1) * na for n in range(horizon)]
    if initial_q is not None:
        if (initial_q.horizon, initial_q.n_states, initial_q.n_actions) != (horizon, ne, na):
            raise ValueError("initial table shape does not match the environment")
        return [initial_q.stages[n].reshape(-1).tolist() for n in range(horizon)]
    if config.q_init.kind == "constant":
        return [[config.q_init.value] * s for s in sizes]
    gen = stream_generator(config.seed, INIT_STREAM)
    lo, hi = config.q_init.low, config.q_init.high
    draws = gen.random(sum(sizes))
    flat = (lo + draws * (hi - lo)).tolist()
    out, pos = [], 0
    for s in sizes:
        out.append(flat[pos:pos + s])
        pos += s
    return out


def train(
    env: EnvSpec,
    config: TrainConfig,
    reference: QTable | None = None,
    initial_q: QTable | None = None,
) -> TrainResult:
    """Run tabular Q-learning for ``config.episodes`` episodes.

    When ``reference`` is given, the sup-norm distance to it over all
    reachable cells (terminal boundary included) is recorded after every
    episode. ``initial_q`` overrides ``config.q_init`` with explicit values,
    e.g. to start from an exact solution.
    """
    env.ensure_valid()
    horizon, ne, na = env.horizon, env.n_states, env.n_actions
    if reference is not None and (
        reference.horizon != horizon
        or reference.n_states != ne
        or reference.n_actions != na
    ):
        raise ValueError("reference table shape does not match the environment")

    tab = env.tables
    stay_t, jump_t = tab.stay, tab.jump_cum
    rc, rexp = tab.reward_current, tab.reward_expected
    g_full = tab.terminal
    adm = tab.adm  # None when every action is admissible everywhere

    q_flat = _flat_tables(env, config, initial_q)
    # reference flats and, under restricted admissibility, the flat offsets
    # over which the sup-norm runs
    ref_flat = None
    adm_offsets = None
    boundary_err = 0.0
    if reference is not None:
        ref_flat = [reference.stages[n].reshape(-1).tolist() for n in range(horizon)]
        if adm is not None:
            adm_offsets = []
            for n in range(horizon):
                offs = []
                for x in range(ne):
                    for t in range(n + 1):
                        base = (x * (n + 1) + t) * na
                        offs.extend(base + a for a in adm[x][t])
                adm_offsets.append(offs)
        # stage-N boundary term of the sup norm; constant, since training
        # never writes the boundary
        g_arr = np.array([[g_full[x][t] for t in range(horizon + 1)] for x in range(ne)])
        bdiff = np.abs(g_arr[:, :, None] - reference.stages[horizon])
        if not np.isnan(bdiff).all():
            boundary_err = float(np.nanmax(bdiff))

    episodes = config.episodes
    rewards = np.empty(episodes)
    errors = np.empty(episodes) if reference is not None else None

    eps = config.epsilon
    fixed_start = config.start_state.kind == "fixed"
    if fixed_start and not (0 <= config.start_state.x0 < ne):
        raise ValueError(f"start state {config.start_state.x0} out of range")
    x0 = config.start_state.x0
    schedule = config.schedule
    const_alpha = schedule.alpha if schedule.kind == "constant" else None

    block = 4 * horizon + 2
    chunk = max(1, _CHUNK_FLOATS // block)
    gen = stream_generator(config.seed, TRAIN_STREAM)

    m = 0
    while m < episodes:
        take = min(chunk, episodes - m)
        rows = gen.random((take, block)).tolist()
        for row in rows:
            alpha = const_alpha if const_alpha is not None else lr(schedule, m)
            u = row
            k = 1
            x = x0 if fixed_start else int(u[0] * ne)
            t = 0
            total = 0.0
            for n in range(horizon):
                q_n = q_flat[n]
                base = (x * (n + 1) + t) * na
                acts = adm[x][t] if adm is not None else None
                # epsilon-greedy on the current stage-n slice
                if u[k] < eps:
                    k += 1
                    if acts is None:
                        a = int(u[k] * na)
                    else:
                        a = acts[int(u[k] * len(acts))]
                    k += 1
                else:
                    k += 1
                    if acts is None:
                        a = 0
                        best = q_n[base]
                        for j in range(1, na):
                            v = q_n[base + j]
                            if v > best:
                                best = v
                                a = j
                    else:
                        a = acts[0]
                        best = q_n[base + a]
                        for j in acts[1:]:
                            v = q_n[base + j]
                            if v > best:
                                best = v
                                a = j
                r = rc[x][t] if rc is not None else rexp[n][x][a][t]
                total += r
                if u[k] < stay_t[x][a][t]:
                    k += 1
                    nx, nt = x, t + 1
                else:
                    k += 1
                    uu = u[k]
                    k += 1
                    nx = x
                    for cum, nx in jump_t[x][a]:
                        if uu < cum:
                            break
                    nt = 0
                # target reads the pre-episode table: stage n+1 has not been
                # written yet on this forward pass
                if n == horizon - 1:
                    target = r + g_full[nx][nt]
                else:
                    q_next = q_flat[n + 1]
                    b2 = (nx * (n + 2) + nt) * na
                    nacts = adm[nx][nt] if adm is not None else None
                    if nacts is None:
                        mx = q_next[b2]
                        for j in range(1, na):
                            v = q_next[b2 + j]
                            if v > mx:
                                mx = v
                    else:
                        mx = q_next[b2 + nacts[0]]
                        for j in nacts[1:]:
                            v = q_next[b2 + j]
                            if v > mx:
                                mx = v
                    target = r + mx
                i = base + a
                qv = q_n[i]
                q_n[i] = qv + alpha * (target - qv)
                x, t = nx, nt
            total += g_full[x][t]
            rewards[m] = total
            if ref_flat is not None:
                worst = boundary_err
                for n in range(horizon):
                    q_n, r_n = q_flat[n], ref_flat[n]
                    if adm_offsets is None:
                        for i in range(len(q_n)):
                            d = q_n[i] - r_n[i]
                            if d < 0.0:
                                d = -d
                            if d > worst:
                                worst = d
                    else:
                        for i in adm_offsets[n]:
                            d = q_n[i] - r_n[i]
                            if d < 0.0:
                                d = -d
                            if d > worst:
                                worst = d
                errors[m] = worst
            m += 1

    return TrainResult(
        q=_materialize(env, q_flat),
        rewards=rewards,
        errors=errors,
    )


def _materialize(env: EnvSpec, q_flat) -> QTable:
    """Flat lists -> QTable, masking inadmissible cells and attaching the
    untouched terminal boundary."""
    horizon, ne, na = env.horizon, env.n_states, env.n_actions
    stages = []
    for n in range(horizon):
        arr = np.asarray(q_flat[n], dtype=float).reshape(ne, n + 1, na)
        if env.admissible is not None:
            for x in range(ne):
                for t in range(n + 1):
                    acts = env.admissible_actions(x, t)
                    for a in range(na):
                        if a not in acts:
                            arr[x, t, a] = np.nan
        stages.append(arr)
    g = np.empty((ne, horizon + 1))
    for x in range(ne):
        for t in range(horizon + 1):
            g[x, t] = env.tables.terminal[x][t]
    stages.append(np.repeat(g[:, :, None], na, axis=2))
    return QTable(horizon, ne, na, stages)


def sup_error(q: QTable, reference: QTable) -> float:
    """Max absolute difference over all reachable cells, terminal boundary
    included. Cells NaN in either table (inadmissible) are ignored."""
    if (q.horizon, q.n_states, q.n_actions) != (
        reference.horizon,
        reference.n_states,
        reference.n_actions,
    ):
        raise ValueError("table shapes do not match")
    worst = 0.0
    for qs, rs in zip(q.stages, reference.stages):
        diff = np.abs(qs - rs)
        if np.isnan(diff).all():
            continue
        worst = max(worst, float(np.nanmax(diff)))
    return worst
