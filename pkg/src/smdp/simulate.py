"""Episode sampling, the jump-chain time-change construction, and
distributional diagnostics for the inter-jump law.

Two independent samplers of the same process live here: ``run_episode``
draws transitions step by step from the extended-state kernel, while
``simulate_hmap`` builds paths from a jump chain with per-state holding
times and reads the state/age sequence off the cumulative jump clock.
``exact_marginal`` propagates the kernel forward and serves as the exact
reference law for both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .bellman import Policy, policy_hash
from .core import EnvSpec, ExtendedState
from .rng import PhiloxStreams, stream_generator

PMF_TOL = 1e-12
GEOMETRIC_TOL = 1e-10


@dataclass
class EpisodeTrace:
    """One sampled episode: stagewise states, ages, actions and rewards.

    ``states``/``ages`` have horizon+1 entries; ``actions`` has horizon
    entries; ``rewards[n]`` is the stage-n reward for n < horizon and the
    terminal reward at index horizon. ``total_reward`` is their sum.
    """

    seed: int
    episode: int
    start: ExtendedState
    states: list[int]
    ages: list[int]
    actions: list[int]
    rewards: list[float]
    total_reward: float

    @property
    def horizon(self) -> int:
        return len(self.actions)

    @property
    def steps(self) -> list[tuple]:
        """Rows (n, x, t, a, reward); the final row has a = None and the
        terminal reward."""
        n = self.horizon
        rows = [
            (k, self.states[k], self.ages[k], self.actions[k], self.rewards[k])
            for k in range(n)
        ]
        rows.append((n, self.states[n], self.ages[n], None, self.rewards[n]))
        return rows


def _action_fn(env: EnvSpec, action_source):
    """(callback, needs-admissibility-check, stage-major rows or None)."""
    if isinstance(action_source, Policy):
        if action_source.horizon != env.horizon or action_source.n_states != env.n_states:
            raise ValueError("policy shape does not match the environment")
        rows = [s.tolist() for s in action_source.stages]
        return (lambda n, x, t: rows[n][x][t]), False, rows
    if callable(action_source):
        return action_source, True, None
    raise TypeError(f"action source must be a Policy or callable, got {type(action_source)}")


def run_episode(
    env: EnvSpec,
    action_source,
    start_x: int,
    seed: int,
    episode: int = 0,
    _streams: PhiloxStreams | None = None,
    _prepared=None,
) -> EpisodeTrace:
    """Sample one episode from age 0, drawing from stream (seed, episode).

    ``action_source`` is a Policy or a callback (n, x, t) -> action id;
    callback actions are checked for admissibility every step.
    """
    env.ensure_valid()
    if not (0 <= start_x < env.n_states):
        raise ValueError(f"unknown start state {start_x}")
    horizon = env.horizon
    tab = env.tables
    choose, check, rows = _prepared if _prepared is not None else _action_fn(env, action_source)

    gen = _streams.generator(episode) if _streams is not None else \
        stream_generator(seed, episode)
    u = gen.random(2 * horizon + 2).tolist()

    stay_t, jump_t = tab.stay, tab.jump_cum
    rc, rexp = tab.reward_current, tab.reward_expected
    states = [0] * (horizon + 1)
    ages = [0] * (horizon + 1)
    actions = [0] * horizon
    rewards = [0.0] * (horizon + 1)
    x, t = start_x, 0
    k = 0
    total = 0.0
    stay_x = stay_t[x]
    jump_x = jump_t[x]
    r_x = rc[x] if rc is not None else None
    for n in range(horizon):
        states[n] = x
        ages[n] = t
        if rows is not None:
            a = rows[n][x][t]
        else:
            a = int(choose(n, x, t))
            if a not in tab.actions_at(x, t, env.n_actions):
                raise ValueError(f"action {a} not admissible at stage {n}, (x={x}, t={t})")
        actions[n] = a
        r = r_x[t] if r_x is not None else rexp[n][x][a][t]
        rewards[n] = r
        total += r
        if u[k] < stay_x[a][t]:
            k += 1
            t += 1
        else:
            k += 1
            uu = u[k]
            k += 1
            dest = x
            for cum, dest in jump_x[a]:
                if uu < cum:
                    break
            x, t = dest, 0
            stay_x = stay_t[x]
            jump_x = jump_t[x]
            if rc is not None:
                r_x = rc[x]
    states[horizon] = x
    ages[horizon] = t
    g = tab.terminal[x][t]
    rewards[horizon] = g
    total += g
    return EpisodeTrace(
        seed=seed,
        episode=episode,
        start=ExtendedState(start_x, 0),
        states=states,
        ages=ages,
        actions=actions,
        rewards=rewards,
        total_reward=total,
    )


def run_episodes(env, action_source, start_x, count: int, seed: int):
    """Episodes 0..count-1, each on its own (seed, episode) stream;
    identical to calling run_episode per index."""
    env.ensure_valid()
    streams = PhiloxStreams(seed)
    prepared = _action_fn(env, action_source)
    return [
        run_episode(env, action_source, start_x, seed, episode=i,
                    _streams=streams, _prepared=prepared)
        for i in range(count)
    ]


# -- jump-chain + holding-time construction ----------------------------------


@dataclass
class HmapSpec:
    """Jump chain with per-state holding-time distributions.

    ``jump_matrix`` is row-stochastic with an exactly-zero diagonal;
    ``sojourn_pmf[x][k]`` is the probability the chain holds state x for
    k+1 steps (support 1..len). Each pmf must sum to 1 within 1e-12 unless
    ``renormalize_pmf`` explicitly requests rescaling of truncated tails.
    """

    jump_matrix: np.ndarray
    sojourn_pmf: list[np.ndarray]
    initial_state: int
    renormalize_pmf: bool = False

    def __post_init__(self):
        self.jump_matrix = np.asarray(self.jump_matrix, dtype=float)
        ne = self.jump_matrix.shape[0]
        if self.jump_matrix.shape != (ne, ne):
            raise ValueError("jump matrix must be square")
        if not (0 <= self.initial_state < ne):
            raise ValueError(f"initial state {self.initial_state} out of range")
        for x in range(ne):
            if self.jump_matrix[x, x] != 0.0:
                raise ValueError(f"jump matrix diagonal at state {x} must be exactly 0")
            row_sum = float(self.jump_matrix[x].sum())
            if ne > 1 and abs(row_sum - 1.0) > PMF_TOL:
                raise ValueError(f"jump matrix row {x} sums to {row_sum!r}, not 1")
        if len(self.sojourn_pmf) != ne:
            raise ValueError("need one holding-time pmf per state")
        pmfs = []
        for x, pmf in enumerate(self.sojourn_pmf):
            pmf = np.asarray(pmf, dtype=float)
            if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0.0):
                raise ValueError(f"holding-time pmf for state {x} must be non-negative, 1-d")
            total = float(pmf.sum())
            if total == 0.0:
                raise ValueError(f"holding-time pmf for state {x} has zero mass")
            if self.renormalize_pmf:
                pmf = pmf / total
            elif abs(total - 1.0) > PMF_TOL:
                raise ValueError(
                    f"holding-time pmf for state {x} sums to {total!r}; "
                    "pass renormalize_pmf=True to rescale a truncated tail"
                )
            pmfs.append(pmf)
        self.sojourn_pmf = pmfs

    @property
    def n_states(self) -> int:
        return self.jump_matrix.shape[0]


def truncated_geometric(p: float, t_max: int, renormalize: bool = False) -> np.ndarray:
    """Geometric(success p) holding-time pmf truncated to support 1..t_max."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"success probability {p} outside (0, 1]")
    k = np.arange(t_max)
    pmf = (1.0 - p) ** k * p
    if renormalize:
        pmf = pmf / pmf.sum()
    return pmf


def simulate_hmap(h: HmapSpec, horizon: int, seed: int, episode: int = 0):
    """Sample (state path, age path) for t = 0..horizon via the time change:
    states come from the jump chain, ages count steps since the last jump
    epoch on the cumulative holding-time clock."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    gen = stream_generator(seed, episode)
    u = gen.random(2 * (horizon + 2)).tolist()
    cums = [np.cumsum(pmf) for pmf in h.sojourn_pmf]
    jump_cum = np.cumsum(h.jump_matrix, axis=1)

    xs = np.empty(horizon + 1, dtype=np.int64)
    ages = np.empty(horizon + 1, dtype=np.int64)
    x = h.initial_state
    k = 0
    clock = 0  # start of the current holding segment
    while clock <= horizon:
        hold = int(np.searchsorted(cums[x], u[k], side="right")) + 1
        k += 1
        end = min(clock + hold - 1, horizon)
        for t in range(clock, end + 1):
            xs[t] = x
            ages[t] = t - clock
        clock += hold
        if clock <= horizon:
            if jump_cum[x][-1] <= 0.0:
                raise ValueError(
                    f"state {x} must jump at time {clock} but its jump row has no mass"
                )
            x = int(np.searchsorted(jump_cum[x], u[k], side="right"))
            k += 1
    return xs, ages


# -- exact laws and diagnostics ----------------------------------------------


def exact_marginal(env: EnvSpec, policy: Policy, start_x: int, n: int) -> np.ndarray:
    """Distribution of (state, age) at stage n from (start_x, 0) under the
    policy, by forward propagation of the kernel. Shape (n_states, n+1)."""
    env.ensure_valid()
    if not (0 <= n <= env.horizon):
        raise ValueError(f"stage {n} out of range 0..{env.horizon}")
    if not (0 <= start_x < env.n_states):
        raise ValueError(f"unknown start state {start_x}")
    ne = env.n_states
    mu = np.zeros((ne, 1))
    mu[start_x, 0] = 1.0
    for k in range(n):
        nxt = np.zeros((ne, k + 2))
        for x in range(ne):
            for t in range(k + 1):
                m = mu[x, t]
                if m == 0.0:
                    continue
                a = policy.action(k, x, t)
                stay = env.stay(x, a, t)
                nxt[x, t + 1] += m * stay
                if stay < 1.0:
                    for y in range(ne):
                        if y != x:
                            p = (1.0 - stay) * env.jump(x, a, y)
                            if p != 0.0:
                                nxt[y, 0] += m * p
        mu = nxt
    return mu


@dataclass(frozen=True)
class InterjumpPmf:
    """Exact law of the first inter-jump time: probs[k-1] = P(T = k) for
    k = 1..k_max, plus the tail mass P(T > k_max) (positive when the state
    can be held past k_max, e.g. absorbing dynamics)."""

    probs: np.ndarray
    tail: float

    def __len__(self):
        return len(self.probs)


def interjump_pmf(env: EnvSpec, policy: Policy, start_x: int, k_max: int) -> InterjumpPmf:
    """First inter-jump time distribution from (start_x, 0) by the exact
    survival recursion (no sampling)."""
    env.ensure_valid()
    if not (0 <= start_x < env.n_states):
        raise ValueError(f"unknown start state {start_x}")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if k_max > env.horizon:
        raise ValueError(f"k_max {k_max} exceeds the horizon {env.horizon}")
    if policy.horizon != env.horizon or policy.n_states != env.n_states:
        raise ValueError("policy shape does not match the environment")
    probs = np.empty(k_max)
    survive = 1.0
    for k in range(1, k_max + 1):
        a = policy.action(k - 1, start_x, k - 1)
        if a not in env.admissible_actions(start_x, k - 1):
            raise ValueError(
                f"policy action {a} inadmissible at stage {k - 1}, (x={start_x}, t={k - 1})"
            )
        stay = env.stay(start_x, a, k - 1)
        probs[k - 1] = survive * (1.0 - stay)
        survive *= stay
    return InterjumpPmf(probs=probs, tail=survive)


@dataclass(frozen=True)
class GeometricCheck:
    consistent: bool
    degenerate: bool
    first_violation: int | None  # 1-based inter-jump time index
    p_hat: float
    max_abs_dev: float

    def __str__(self):
        if self.degenerate:
            return f"consistent (degenerate, P(T=1) = {self.p_hat})"
        if self.consistent:
            return f"consistent with geometric(p = {self.p_hat})"
        return (
            f"inconsistent with geometric(p = {self.p_hat}) "
            f"at T = {self.first_violation} (deviation {self.max_abs_dev:.3g})"
        )


def geometric_consistency(pmf, tol: float = GEOMETRIC_TOL) -> GeometricCheck:
    """Check whether an inter-jump pmf is the geometric law fitted from its
    first entry: P(T=j) = (1-p)^(j-1) p with p = P(T=1), within ``tol``.

    A degenerate first entry (0 or 1, the always-jump / never-jump edge) is
    reported as consistent-degenerate without fitting.
    """
    if isinstance(pmf, InterjumpPmf):
        probs = np.asarray(pmf.probs, dtype=float)
    else:
        probs = np.asarray(pmf, dtype=float)
    if probs.ndim != 1 or probs.size < 2:
        raise ValueError("need a pmf over at least T in {1, 2}")
    p_hat = float(probs[0])
    if p_hat <= PMF_TOL or p_hat >= 1.0 - PMF_TOL:
        return GeometricCheck(True, True, None, p_hat, 0.0)
    first = None
    max_dev = 0.0
    expected = p_hat
    for j in range(1, probs.size + 1):
        dev = abs(float(probs[j - 1]) - expected)
        if dev > max_dev:
            max_dev = dev
        if dev > tol and first is None:
            first = j
        expected *= 1.0 - p_hat
    return GeometricCheck(first is None, False, first, p_hat, max_dev)


# -- chi-square helpers -------------------------------------------------------


def pool_low_expected(expected: np.ndarray, counts: list[np.ndarray], min_expected: float = 5.0):
    """Pool bins whose expected count falls below ``min_expected`` into one
    tail bin (merged into the smallest regular bin if still too light).
    Returns (pooled expected, [pooled counts...])."""
    expected = np.asarray(expected, dtype=float)
    low = expected < min_expected
    if not low.any():
        return expected, [np.asarray(c, dtype=float) for c in counts]
    keep = ~low
    pooled_e = expected[keep].tolist()
    pooled_cs = [np.asarray(c, dtype=float)[keep].tolist() for c in counts]
    tail_e = float(expected[low].sum())
    tail_cs = [float(np.asarray(c, dtype=float)[low].sum()) for c in counts]
    if tail_e >= min_expected or not pooled_e:
        pooled_e.append(tail_e)
        for lst, v in zip(pooled_cs, tail_cs):
            lst.append(v)
    else:
        j = int(np.argmin(pooled_e))
        pooled_e[j] += tail_e
        for lst, v in zip(pooled_cs, tail_cs):
            lst[j] += v
    return np.asarray(pooled_e), [np.asarray(c) for c in pooled_cs]


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    bins: int


def chi_square_gof(counts, expected_probs, min_expected: float = 5.0) -> ChiSquareResult:
    """Goodness of fit of observed counts against a fully specified law."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValueError("counts and expected probabilities must have the same shape")
    n = counts.sum()
    expected = probs * n
    expected, (pooled,) = pool_low_expected(expected, [counts], min_expected)
    if expected.size < 2:
        raise ValueError("fewer than 2 bins remain after pooling")
    stat = float(((pooled - expected) ** 2 / expected).sum())
    dof = expected.size - 1
    return ChiSquareResult(stat, dof, float(_scipy_stats.chi2.sf(stat, dof)), expected.size)


def chi_square_two_sample(counts_a, counts_b, min_expected: float = 5.0) -> ChiSquareResult:
    """Homogeneity test between two independent count vectors over the same
    bins (contingency-table chi-square, no continuity correction)."""
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("count vectors must have the same shape")
    total = a.sum() + b.sum()
    expected_combined = (a + b) * (a.sum() / total)
    _, (a, b) = pool_low_expected(expected_combined, [a, b], min_expected)
    table = np.stack([a, b])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.shape[1] < 2:
        raise ValueError("fewer than 2 bins remain after pooling")
    stat, p, dof, _ = _scipy_stats.chi2_contingency(table, correction=False)
    return ChiSquareResult(float(stat), int(dof), float(p), table.shape[1])


# -- trace export --------------------------------------------------------------


def write_traces(traces, path, env: EnvSpec, action_source=None, seed: int | None = None):
    """Line-delimited trace file: a JSON header (seed, env hash, policy
    hash, tool version) followed by one JSON record per step."""
    from . import __version__
    from .envfile import env_hash

    header = {
        "type": "header",
        "seed": seed if seed is not None else (traces[0].seed if traces else None),
        "env_hash": env_hash(env),
        "policy_hash": policy_hash(action_source)
        if isinstance(action_source, Policy)
        else None,
        "tool_version": __version__,
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for tr in traces:
            for (n, x, t, a, reward) in tr.steps:
                rec = {
                    "episode": tr.episode,
                    "n": n,
                    "x": x,
                    "t": t,
                    "a": a,
                    "reward": reward,
                }
                f.write(json.dumps(rec) + "\n")


def read_traces(path):
    """Parse a trace file back into (header, list of step-record dicts)."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: line 1: invalid JSON ({e.msg})") from e
    if not isinstance(header, dict) or header.get("type") != "header":
        raise ValueError(f"{path}: line 1: expected the header record")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: line {i}: invalid JSON ({e.msg})") from e
    return header, records
