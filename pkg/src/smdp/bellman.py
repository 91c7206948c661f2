"""Exact finite-horizon solutions: backward induction for values and
action values, policy evaluation by backward recursion, a path-enumeration
oracle, and greedy policy extraction.

Tables are stored only on the cells reachable from age 0 (t <= n); queries
outside raise instead of returning a default. The solver computes values,
action values and the greedy policy in a single sweep with one shared
backup arithmetic, so max-consistency between the outputs holds exactly.
"""

from __future__ import annotations

import itertools
import json
import math

import numpy as np

from .core import (
    EnvSpec,
    ExtendedState,
    _stage_reward_raw,
    sojourn_of_path,
    terminal_reward,
)

TABLE_FORMAT_VERSION = 1

BRUTE_FORCE_PATH_LIMIT = 10**7


class _StageTable:
    """Common shape/bounds handling for per-stage tables over (x, t <= n)."""

    kind = "table"

    def __init__(self, horizon: int, n_states: int, stages: list[np.ndarray]):
        self.horizon = horizon
        self.n_states = n_states
        self.stages = stages
        for arr in stages:
            arr.flags.writeable = False

    def _check(self, n: int, x: int, t: int, max_stage: int) -> None:
        if not (0 <= n <= max_stage):
            raise ValueError(f"stage {n} out of range 0..{max_stage}")
        if not (0 <= x < self.n_states):
            raise ValueError(f"state {x} out of range")
        if not (0 <= t <= n):
            raise ValueError(f"cell (x={x}, t={t}) not reachable at stage {n}")


class ValueTable(_StageTable):
    """v_n(x, t) for n = 0..N; stage N holds the terminal reward."""

    kind = "values"

    def value(self, n: int, x: int, t: int) -> float:
        self._check(n, x, t, self.horizon)
        return float(self.stages[n][x, t])


class QTable(_StageTable):
    """q_n(x, t, a) for n = 0..N-1 plus the stage-N boundary, which repeats
    the terminal reward across actions. Inadmissible cells hold NaN."""

    kind = "qtable"

    def __init__(self, horizon, n_states, n_actions, stages):
        self.n_actions = n_actions
        super().__init__(horizon, n_states, stages)

    def q(self, n: int, x: int, t: int, a: int) -> float:
        self._check(n, x, t, self.horizon)
        if not (0 <= a < self.n_actions):
            raise ValueError(f"action {a} out of range")
        v = float(self.stages[n][x, t, a])
        if math.isnan(v):
            raise ValueError(f"action {a} not admissible at stage {n}, (x={x}, t={t})")
        return v


class Policy(_StageTable):
    """Decision rules: an admissible action for every (x, t <= n), n < N."""

    kind = "policy"

    def action(self, n: int, x: int, t: int) -> int:
        self._check(n, x, t, self.horizon - 1)
        return int(self.stages[n][x, t])


def constant_policy(env: EnvSpec, a: int) -> Policy:
    """Policy playing one fixed action everywhere (must be admissible)."""
    stages = []
    for n in range(env.horizon):
        arr = np.full((env.n_states, n + 1), a, dtype=np.int64)
        stages.append(arr)
    pol = Policy(env.horizon, env.n_states, stages)
    _check_policy(env, pol)
    return pol


def policy_from_map(env: EnvSpec, actions: dict, default: int = 0) -> Policy:
    """Policy from a sparse {(n, x, t): a} map, defaulting elsewhere."""
    stages = []
    for n in range(env.horizon):
        arr = np.full((env.n_states, n + 1), default, dtype=np.int64)
        for (nn, x, t), a in actions.items():
            if nn == n:
                arr[x, t] = a
        stages.append(arr)
    pol = Policy(env.horizon, env.n_states, stages)
    _check_policy(env, pol)
    return pol


def _check_policy(env: EnvSpec, policy: Policy) -> None:
    if policy.horizon != env.horizon or policy.n_states != env.n_states:
        raise ValueError("policy shape does not match the environment")
    for n in range(env.horizon):
        for x in range(env.n_states):
            for t in range(n + 1):
                a = int(policy.stages[n][x, t])
                if a not in env.admissible_actions(x, t):
                    raise ValueError(
                        f"policy action {a} inadmissible at stage {n}, (x={x}, t={t})"
                    )


def _backup(env: EnvSpec, n: int, v_next: np.ndarray, x: int, t: int, a: int) -> float:
    """r_n(x,t,a) plus the kernel-weighted continuation from the stage-(n+1)
    value slice. The term order (reward, jump terms by destination index,
    stay term) is the single arithmetic path used everywhere."""
    acc = _stage_reward_raw(env, n, x, t, a)
    stay = env.stay(x, a, t)
    jump_row = env.jump_prob[x][a]
    one_minus = 1.0 - stay
    for y in range(env.n_states):
        if y != x and jump_row[y] != 0.0:
            acc += v_next[y, 0] * (one_minus * jump_row[y])
    return acc + v_next[x, t + 1] * stay


def apply_L(env: EnvSpec, n: int, v, s: ExtendedState, a: int) -> float:
    """One-action backup of a stage-(n+1) value slice.

    ``v`` is indexed [state, age] and must cover every successor of (s, a);
    a missing successor cell is an indexing bug and raises.
    """
    if not (0 <= n <= env.horizon - 1):
        raise ValueError(f"stage {n} out of range 0..{env.horizon - 1}")
    env.check_admissible(s, a)
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] != env.n_states:
        raise ValueError(f"value slice must have shape (n_states, ages), got {v.shape}")
    if s.t + 1 >= v.shape[1]:
        raise ValueError(
            f"value slice has no cell for successor age {s.t + 1} (shape {v.shape})"
        )
    return _backup(env, n, v, s.x, s.t, a)


def solve_bellman(env: EnvSpec) -> tuple[ValueTable, QTable, Policy]:
    """Backward induction from the terminal boundary.

    Per cell: action values by `_backup`, value = max over admissible
    actions, policy = argmax with lowest-index tie-break. Deterministic
    given the environment.
    """
    env.ensure_valid()
    ne, na, horizon = env.n_states, env.n_actions, env.horizon

    g = np.empty((ne, horizon + 1))
    for x in range(ne):
        for t in range(horizon + 1):
            g[x, t] = terminal_reward(env, ExtendedState(x, t))

    v_stages = [None] * (horizon + 1)
    q_stages = [None] * (horizon + 1)
    p_stages = [None] * horizon
    v_stages[horizon] = g
    q_stages[horizon] = np.repeat(g[:, :, None], na, axis=2)

    for n in range(horizon - 1, -1, -1):
        v_n = np.empty((ne, n + 1))
        q_n = np.full((ne, n + 1, na), np.nan)
        p_n = np.zeros((ne, n + 1), dtype=np.int64)
        v_next = v_stages[n + 1]
        for x in range(ne):
            for t in range(n + 1):
                best_a = -1
                best = -math.inf
                for a in env.admissible_actions(x, t):
                    q = _backup(env, n, v_next, x, t, a)
                    q_n[x, t, a] = q
                    if q > best:
                        best = q
                        best_a = a
                v_n[x, t] = best
                p_n[x, t] = best_a
        v_stages[n] = v_n
        q_stages[n] = q_n
        p_stages[n] = p_n

    return (
        ValueTable(horizon, ne, v_stages),
        QTable(horizon, ne, na, q_stages),
        Policy(horizon, ne, p_stages),
    )


def policy_evaluate(env: EnvSpec, policy: Policy) -> ValueTable:
    """Value of a fixed policy by the same backward recursion, with the
    policy's action substituted for the max."""
    env.ensure_valid()
    _check_policy(env, policy)
    ne, horizon = env.n_states, env.horizon

    g = np.empty((ne, horizon + 1))
    for x in range(ne):
        for t in range(horizon + 1):
            g[x, t] = terminal_reward(env, ExtendedState(x, t))

    v_stages = [None] * (horizon + 1)
    v_stages[horizon] = g
    for n in range(horizon - 1, -1, -1):
        v_n = np.empty((ne, n + 1))
        v_next = v_stages[n + 1]
        for x in range(ne):
            for t in range(n + 1):
                a = int(policy.stages[n][x, t])
                v_n[x, t] = _backup(env, n, v_next, x, t, a)
        v_stages[n] = v_n
    return ValueTable(horizon, ne, v_stages)


def brute_force_value(env: EnvSpec, policy: Policy, start: ExtendedState) -> float:
    """Policy value by exhaustive enumeration of all state paths.

    Independent of the backward recursion: per path, the age sequence is
    rebuilt from the state sequence (offset by the start age until the
    first jump) and the probability accumulated step by step.
    """
    env.ensure_valid()
    env.check_state(start)
    _check_policy(env, policy)
    ne, horizon = env.n_states, env.horizon
    n_paths = ne**horizon
    if n_paths > BRUTE_FORCE_PATH_LIMIT:
        raise ValueError(
            f"{ne}^{horizon} = {n_paths} paths exceeds the enumeration limit "
            f"{BRUTE_FORCE_PATH_LIMIT}"
        )

    total = 0.0
    for tail in itertools.product(range(ne), repeat=horizon):
        path = (start.x, *tail)
        ages = sojourn_of_path(path)
        if start.t:
            for i in range(len(path)):
                if ages[i] != i:  # first jump happened at or before i
                    break
                ages[i] += start.t
        prob = 1.0
        reward = 0.0
        for n in range(horizon):
            x, t = path[n], ages[n]
            # start ages > 0 can push the age past the stored policy domain
            # (t <= n); reuse the rule at the highest stored age there
            a = policy.action(n, x, t if t <= n else n)
            reward += _stage_reward_raw(env, n, x, t, a)
            stay = env.stay(x, a, t)
            if path[n + 1] == x:
                prob *= stay
            else:
                prob *= (1.0 - stay) * env.jump(x, a, path[n + 1])
            if prob == 0.0:
                break
        if prob == 0.0:
            continue
        reward += terminal_reward(env, ExtendedState(path[horizon], ages[horizon]))
        total += prob * reward
    return total


def greedy_policy(q: QTable, env: EnvSpec) -> Policy:
    """Stage-wise argmax over admissible actions, lowest index on ties."""
    if q.horizon != env.horizon or q.n_states != env.n_states or q.n_actions != env.n_actions:
        raise ValueError("action-value table shape does not match the environment")
    stages = []
    for n in range(env.horizon):
        arr = np.zeros((env.n_states, n + 1), dtype=np.int64)
        for x in range(env.n_states):
            for t in range(n + 1):
                best_a = -1
                best = -math.inf
                for a in env.admissible_actions(x, t):
                    val = float(q.stages[n][x, t, a])
                    if val > best:
                        best = val
                        best_a = a
                arr[x, t] = best_a
        stages.append(arr)
    return Policy(env.horizon, env.n_states, stages)


# -- serialization -----------------------------------------------------------


def _nan_to_none(arr: np.ndarray) -> list:
    flat = arr.reshape(-1)
    return [None if (arr.dtype.kind == "f" and math.isnan(v)) else v.item() for v in flat]


def table_to_dict(table, states, actions, meta: dict | None = None) -> dict:
    """File form: per-stage dense arrays flattened in (x, t[, a]) row-major
    order, with NaN (inadmissible) cells as null."""
    d = {
        "format_version": TABLE_FORMAT_VERSION,
        "kind": table.kind,
        "horizon": table.horizon,
        "states": list(states),
        "actions": list(actions),
        "stages": [_nan_to_none(s) for s in table.stages],
    }
    if meta:
        d["meta"] = meta
    return d


def table_from_dict(d: dict):
    if not isinstance(d, dict):
        raise ValueError("table file: expected an object")
    if d.get("format_version") != TABLE_FORMAT_VERSION:
        raise ValueError(
            f"table file: unsupported format_version {d.get('format_version')!r}"
        )
    kind = d.get("kind")
    horizon = d.get("horizon")
    states = d.get("states")
    actions = d.get("actions")
    stages_flat = d.get("stages")
    if not isinstance(horizon, int) or not isinstance(states, list) \
            or not isinstance(actions, list) or not isinstance(stages_flat, list):
        raise ValueError("table file: missing or malformed horizon/states/actions/stages")
    ne, na = len(states), len(actions)

    def reshape(flat, shape, dtype, stage):
        expected = int(np.prod(shape))
        if len(flat) != expected:
            raise ValueError(
                f"table file: stage {stage} has {len(flat)} entries, expected {expected}"
            )
        vals = [np.nan if v is None else v for v in flat]
        return np.asarray(vals, dtype=dtype).reshape(shape)

    if kind == "values":
        if len(stages_flat) != horizon + 1:
            raise ValueError(f"table file: expected {horizon + 1} stages")
        stages = [reshape(stages_flat[n], (ne, n + 1), float, n) for n in range(horizon + 1)]
        return ValueTable(horizon, ne, stages)
    if kind == "qtable":
        if len(stages_flat) != horizon + 1:
            raise ValueError(f"table file: expected {horizon + 1} stages")
        stages = [
            reshape(stages_flat[n], (ne, n + 1, na), float, n) for n in range(horizon + 1)
        ]
        return QTable(horizon, ne, na, stages)
    if kind == "policy":
        if len(stages_flat) != horizon:
            raise ValueError(f"table file: expected {horizon} stages")
        stages = [reshape(stages_flat[n], (ne, n + 1), np.int64, n) for n in range(horizon)]
        return Policy(horizon, ne, stages)
    raise ValueError(f"table file: unknown kind {kind!r}")


def save_table(table, path, states, actions, meta: dict | None = None) -> None:
    with open(path, "w") as f:
        json.dump(table_to_dict(table, states, actions, meta), f)
        f.write("\n")


def load_table(path):
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}") from e
    return table_from_dict(d)


def policy_hash(policy: Policy) -> str:
    import hashlib

    payload = json.dumps(
        [s.tolist() for s in policy.stages], separators=(",", ":")
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
