"""Domain types and transition-kernel machinery for sojourn-augmented
finite-horizon decision processes.

The controlled process lives on extended states (x, t): a discrete state x
plus the age t counting consecutive steps already spent in x. Kernels are
stored in stay/jump factorized form -- staying increments the age, jumping
resets it to zero -- so the structural constraints on the extended kernel
(same-state moves force t -> t+1, cross-state moves force age 0) hold by
construction. Validation re-checks the induced kernel after ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

PROB_TOL = 1e-12

REWARD_CURRENT_STATE = "current-state"
REWARD_EXPECTED_NEXT = "expected-next-state"


class ExtendedState(NamedTuple):
    """State plus sojourn age: the pair at which the dynamics are Markov."""

    x: int
    t: int


def _clamped(arr, t: int):
    """Entry at index t, reusing the final entry beyond the array length."""
    return arr[t] if t < len(arr) else arr[-1]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class EnvSpec:
    """Finite environment: states, actions, admissibility, factorized kernel,
    reward specification and horizon.

    Construction performs shape normalization only; probability and
    structural constraints are checked by :func:`validate_env` so that
    malformed inputs can be constructed, inspected and reported on.
    Instances are immutable after construction (arrays are frozen) and
    safe to share across workers; all operations on them are pure.

    Parameters
    ----------
    states, actions:
        Ordered name lists; ids are their 0-based positions.
    stay_prob:
        stay_prob[x][a] is an array over ages t; the final entry is reused
        for ages beyond the array length.
    jump_prob:
        jump_prob[x][a] is a length-``len(states)`` vector of destination
        probabilities conditional on a jump; the diagonal entry must be 0.
    reward_kind:
        ``"current-state"``: reward_table[x] is an age-indexed array r(x, t),
        independent of stage and action.
        ``"expected-next-state"``: reward_table is an array of shape
        (horizon, |E|, T, |A|, |E|) holding per-destination rewards
        rbar[n][y][t][a][x'], averaged over destinations by
        :func:`stage_reward`.
    terminal:
        Age-indexed array per state, or the string ``"same-as-reward"``
        (current-state rewards only).
    admissible:
        Optional dict (x, t) -> iterable of action ids; missing keys mean
        "all actions".
    """

    def __init__(
        self,
        states: Sequence[str],
        actions: Sequence[str],
        horizon: int,
        stay_prob,
        jump_prob,
        reward_kind: str,
        reward_table,
        terminal,
        admissible: dict | None = None,
    ):
        self.states = tuple(str(s) for s in states)
        self.actions = tuple(str(a) for a in actions)
        if len(set(self.states)) != len(self.states):
            raise ValueError("duplicate state names")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("duplicate action names")
        self.horizon = int(horizon)
        ne, na = len(self.states), len(self.actions)

        self.stay_prob = tuple(
            tuple(_freeze(np.asarray(stay_prob[x][a], dtype=float)) for a in range(na))
            for x in range(ne)
        )
        for x in range(ne):
            for a in range(na):
                if self.stay_prob[x][a].ndim != 1 or self.stay_prob[x][a].size == 0:
                    raise ValueError(f"stay_prob[{x}][{a}] must be a non-empty 1-d array")
        self.jump_prob = tuple(
            tuple(_freeze(np.asarray(jump_prob[x][a], dtype=float)) for a in range(na))
            for x in range(ne)
        )
        for x in range(ne):
            for a in range(na):
                if self.jump_prob[x][a].shape != (ne,):
                    raise ValueError(
                        f"jump_prob[{x}][{a}] must have length {ne}, "
                        f"got shape {self.jump_prob[x][a].shape}"
                    )

        if reward_kind not in (REWARD_CURRENT_STATE, REWARD_EXPECTED_NEXT):
            raise ValueError(f"unknown reward kind {reward_kind!r}")
        self.reward_kind = reward_kind
        if reward_kind == REWARD_CURRENT_STATE:
            self.reward_table = tuple(
                _freeze(np.asarray(reward_table[x], dtype=float)) for x in range(ne)
            )
            for x, arr in enumerate(self.reward_table):
                if arr.ndim != 1 or arr.size == 0:
                    raise ValueError(f"reward table for state {x} must be a non-empty array")
        else:
            rbar = np.asarray(reward_table, dtype=float)
            if rbar.ndim != 5 or rbar.shape[0] != self.horizon or rbar.shape[1] != ne \
                    or rbar.shape[3] != na or rbar.shape[4] != ne or rbar.shape[2] == 0:
                raise ValueError(
                    "expected-next-state reward table must have shape "
                    f"(horizon, |E|, T, |A|, |E|), got {rbar.shape}"
                )
            self.reward_table = _freeze(rbar)

        self.terminal_same_as_reward = terminal == "same-as-reward"
        if self.terminal_same_as_reward:
            if reward_kind != REWARD_CURRENT_STATE:
                raise ValueError('terminal "same-as-reward" requires current-state rewards')
            self.terminal_table = self.reward_table
        else:
            self.terminal_table = tuple(
                _freeze(np.asarray(terminal[x], dtype=float)) for x in range(ne)
            )
            for x, arr in enumerate(self.terminal_table):
                if arr.ndim != 1 or arr.size == 0:
                    raise ValueError(f"terminal table for state {x} must be a non-empty array")

        self.admissible = None
        if admissible is not None:
            self.admissible = {
                (int(x), int(t)): tuple(int(a) for a in acts)
                for (x, t), acts in admissible.items()
            }
        self._report = None

    # -- basic accessors ---------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def check_state(self, s: ExtendedState) -> None:
        if not (0 <= s.x < self.n_states):
            raise ValueError(f"unknown state id {s.x} (have {self.n_states} states)")
        if s.t < 0:
            raise ValueError(f"negative sojourn age {s.t}")

    def admissible_actions(self, x: int, t: int) -> tuple[int, ...]:
        """D(x, t); defaults to all actions when no entry is present."""
        if self.admissible is not None:
            acts = self.admissible.get((x, t))
            if acts is not None:
                return acts
        return tuple(range(self.n_actions))

    def check_admissible(self, s: ExtendedState, a: int) -> None:
        self.check_state(s)
        if not (0 <= a < self.n_actions) or a not in self.admissible_actions(s.x, s.t):
            raise ValueError(f"action {a} not admissible at (x={s.x}, t={s.t})")

    def stay(self, x: int, a: int, t: int) -> float:
        return float(_clamped(self.stay_prob[x][a], t))

    def jump(self, x: int, a: int, y: int) -> float:
        return float(self.jump_prob[x][a][y])

    def ensure_valid(self) -> None:
        """Validate once and cache; raises on the first use of an invalid env."""
        if self._report is None:
            self._report = validate_env(self)
        if not self._report.ok:
            raise ValueError(f"invalid environment:\n{self._report}")

    # -- dense tables for hot loops ---------------------------------------

    @cached_property
    def tables(self) -> "CompiledTables":
        """Age-expanded plain-python tables shared by the samplers/solvers."""
        return CompiledTables(self)


class CompiledTables:
    """Dense per-age expansions of an EnvSpec (ages 0..horizon), as plain
    python lists for fast inner loops. Read-only by convention."""

    def __init__(self, env: EnvSpec):
        n, ne, na = env.horizon, env.n_states, env.n_actions
        self.stay = [
            [[env.stay(x, a, t) for t in range(n + 1)] for a in range(na)]
            for x in range(ne)
        ]
        # cumulative jump distribution per (x, a): list of (cum_prob, dest)
        self.jump_cum = []
        for x in range(ne):
            row = []
            for a in range(na):
                cum, acc = [], 0.0
                for y in range(ne):
                    p = env.jump(x, a, y)
                    if p > 0.0:
                        acc += p
                        cum.append((acc, y))
                row.append(cum)
            self.jump_cum.append(row)
        self.terminal = [
            [float(_clamped(env.terminal_table[x], t)) for t in range(n + 1)]
            for x in range(ne)
        ]
        if env.reward_kind == REWARD_CURRENT_STATE:
            self.reward_current = [
                [float(_clamped(env.reward_table[x], t)) for t in range(n + 1)]
                for x in range(ne)
            ]
            self.reward_expected = None
        else:
            self.reward_current = None
            self.reward_expected = [
                [
                    [
                        [_stage_reward_raw(env, k, x, t, a) for t in range(n + 1)]
                        for a in range(na)
                    ]
                    for x in range(ne)
                ]
                for k in range(n)
            ]
        if env.admissible is None:
            self.adm = None
        else:
            self.adm = [
                [env.admissible_actions(x, t) for t in range(n + 1)] for x in range(ne)
            ]

    def reward(self, n: int, x: int, t: int, a: int) -> float:
        if self.reward_current is not None:
            return self.reward_current[x][t]
        return self.reward_expected[n][x][a][t]

    def actions_at(self, x: int, t: int, n_actions: int):
        if self.adm is None:
            return range(n_actions)
        return self.adm[x][t]


# -- kernel operations -----------------------------------------------------


def transition_prob(env: EnvSpec, src: ExtendedState, a: int, dst: ExtendedState) -> float:
    """P(dst | src, a) under the induced extended-state kernel.

    Structurally forbidden cells (same state without t -> t+1, or a state
    change landing at age > 0) are exactly zero.
    """
    env.check_admissible(src, a)
    env.check_state(dst)
    s = env.stay(src.x, a, src.t)
    if dst.x == src.x:
        return s if dst.t == src.t + 1 else 0.0
    if dst.t != 0:
        return 0.0
    return (1.0 - s) * env.jump(src.x, a, dst.x)


def state_transition_prob(env: EnvSpec, dest: int, src: ExtendedState, a: int) -> float:
    """Marginal state-transition probability p(dest | x, t, a)."""
    env.check_admissible(src, a)
    if not (0 <= dest < env.n_states):
        raise ValueError(f"unknown state id {dest} (have {env.n_states} states)")
    s = env.stay(src.x, a, src.t)
    if dest == src.x:
        return s
    return (1.0 - s) * env.jump(src.x, a, dest)


def _stage_reward_raw(env: EnvSpec, n: int, x: int, t: int, a: int) -> float:
    if env.reward_kind == REWARD_CURRENT_STATE:
        return float(_clamped(env.reward_table[x], t))
    rbar = env.reward_table
    t_idx = min(t, rbar.shape[2] - 1)
    stay = env.stay(x, a, t)
    total = 0.0
    for dest in range(env.n_states):
        p = stay if dest == x else (1.0 - stay) * env.jump(x, a, dest)
        if p != 0.0:
            total += float(rbar[n, x, t_idx, a, dest]) * p
    return total


def stage_reward(env: EnvSpec, n: int, s: ExtendedState, a: int) -> float:
    """One-stage expected reward at stage n in extended state s under a."""
    if not (0 <= n <= env.horizon - 1):
        raise ValueError(f"stage {n} out of range 0..{env.horizon - 1}")
    env.check_admissible(s, a)
    return _stage_reward_raw(env, n, s.x, s.t, a)


def terminal_reward(env: EnvSpec, s: ExtendedState) -> float:
    env.check_state(s)
    return float(_clamped(env.terminal_table[s.x], s.t))


def sojourn_of_path(path: Sequence[int]) -> list[int]:
    """Age sequence of a state path: 0 at time 0, incrementing while the
    state repeats and resetting to 0 on every change."""
    if len(path) == 0:
        raise ValueError("path must be non-empty")
    ages = [0]
    for i in range(1, len(path)):
        ages.append(ages[-1] + 1 if path[i] == path[i - 1] else 0)
    return ages


# -- reachable-cell bookkeeping ---------------------------------------------


@dataclass(frozen=True)
class ReachableSet:
    """Index over the stage/state/age/action cells attainable from age 0.

    Learned cells are the (n, x, t, a) with 0 <= t <= n <= N-1; stage N is
    the terminal boundary. The flat offset map is dense on the learned
    cells and ``count`` equals |E| * |A| * N * (N+1) / 2.
    """

    n_states: int
    n_actions: int
    horizon: int

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1 or self.horizon < 1:
            raise ValueError("sizes and horizon must be >= 1")

    @property
    def count(self) -> int:
        n = self.horizon
        return self.n_states * self.n_actions * n * (n + 1) // 2

    def stage_cells(self, n: int) -> Iterator[ExtendedState]:
        """All (x, t) with t <= n, for stages n = 0..N."""
        if not (0 <= n <= self.horizon):
            raise ValueError(f"stage {n} out of range 0..{self.horizon}")
        return (
            ExtendedState(x, t)
            for x in range(self.n_states)
            for t in range(n + 1)
        )

    def q_cells(self) -> Iterator[tuple[int, int, int, int]]:
        """All learned cells (n, x, t, a), in offset order."""
        return (
            (n, x, t, a)
            for n in range(self.horizon)
            for x in range(self.n_states)
            for t in range(n + 1)
            for a in range(self.n_actions)
        )

    def offset(self, n: int, x: int, t: int, a: int) -> int:
        if not (0 <= n < self.horizon):
            raise ValueError(f"stage {n} out of range 0..{self.horizon - 1}")
        if not (0 <= x < self.n_states):
            raise ValueError(f"state {x} out of range")
        if not (0 <= t <= n):
            raise ValueError(f"age {t} not reachable at stage {n}")
        if not (0 <= a < self.n_actions):
            raise ValueError(f"action {a} out of range")
        base = self.n_states * self.n_actions * (n * (n + 1) // 2)
        return base + (x * (n + 1) + t) * self.n_actions + a


def reachable_index(n_states: int, n_actions: int, horizon: int) -> ReachableSet:
    return ReachableSet(n_states, n_actions, horizon)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, location: str, message: str) -> None:
        self.issues.append(ValidationIssue(location, message))

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(str(i) for i in self.issues)


def check_kernel_properties(
    kernel: Callable[[int, int, int, int, int], float],
    n_states: int,
    t_values: Sequence[int],
    s_max: int,
    actions_at: Callable[[int, int], Sequence[int]],
    tol: float = PROB_TOL,
) -> list[ValidationIssue]:
    """Probe an arbitrary extended-state kernel P(y, s | x, t, a) for the
    defining constraints: normalization, same-state moves only to age t+1,
    and cross-state moves only to age 0.

    ``kernel`` maps (y, s, x, t, a) to a probability. Ages s are probed in
    0..s_max; violations hidden beyond the probe range are not detected.
    """
    issues: list[ValidationIssue] = []
    for x in range(n_states):
        for t in t_values:
            for a in actions_at(x, t):
                total = 0.0
                for y in range(n_states):
                    for s in range(s_max + 1):
                        p = kernel(y, s, x, t, a)
                        if p < -tol or p > 1.0 + tol:
                            issues.append(ValidationIssue(
                                f"kernel(x={x},t={t},a={a})",
                                f"P({y},{s}|...) = {p} outside [0, 1]",
                            ))
                        total += p
                        if p != 0.0 and y == x and s != t + 1:
                            issues.append(ValidationIssue(
                                f"kernel(x={x},t={t},a={a})",
                                f"same-state mass P({y},{s}|...) = {p} at age {s} != {t + 1}",
                            ))
                        if p != 0.0 and y != x and s != 0:
                            issues.append(ValidationIssue(
                                f"kernel(x={x},t={t},a={a})",
                                f"cross-state mass P({y},{s}|...) = {p} at age {s} != 0",
                            ))
                if abs(total - 1.0) > tol:
                    issues.append(ValidationIssue(
                        f"kernel(x={x},t={t},a={a})",
                        f"probabilities sum to {total!r}, not 1",
                    ))
    return issues


def validate_env(env: EnvSpec) -> ValidationReport:
    """Check every normalization and structural constraint; the report lists
    each violation with its location and is empty iff the env is valid."""
    rep = ValidationReport()
    ne, na, n = env.n_states, env.n_actions, env.horizon
    if n < 1:
        rep.add("horizon", f"must be >= 1, got {n}")
    if ne < 1:
        rep.add("states", "must be non-empty")
    if na < 1:
        rep.add("actions", "must be non-empty")
    if not rep.ok:
        return rep

    for x in range(ne):
        for a in range(na):
            loc = f"(x={x}/{env.states[x]}, a={a}/{env.actions[a]})"
            stay = env.stay_prob[x][a]
            if np.any(stay < 0.0) or np.any(stay > 1.0):
                bad = int(np.argmax((stay < 0.0) | (stay > 1.0)))
                rep.add(f"stay_prob{loc}", f"entry t={bad} is {stay[bad]!r}, outside [0, 1]")
            jump = env.jump_prob[x][a]
            if np.any(jump < 0.0):
                bad = int(np.argmax(jump < 0.0))
                rep.add(f"jump_prob{loc}", f"entry for dest {bad} is {jump[bad]!r} < 0")
            if jump[x] != 0.0:
                rep.add(
                    f"jump_prob{loc}",
                    f"self-destination probability {jump[x]!r} must be exactly 0",
                )
            never_jumps = bool(np.all(stay == 1.0))
            total = float(np.sum(jump))
            if never_jumps and total == 0.0:
                pass  # absorbing within the horizon; jump row unused
            elif abs(total - 1.0) > PROB_TOL:
                rep.add(f"jump_prob{loc}", f"sums to {total!r}, not 1")

    if env.admissible is not None:
        for (x, t), acts in sorted(env.admissible.items()):
            loc = f"admissible(x={x}, t={t})"
            if not (0 <= x < ne) or t < 0:
                rep.add(loc, "key outside the state/age domain")
                continue
            if len(acts) == 0:
                rep.add(loc, "admissible action set is empty")
            for a in acts:
                if not (0 <= a < na):
                    rep.add(loc, f"unknown action id {a}")

    for x in range(ne):
        arrs = [("terminal", env.terminal_table[x])]
        if env.reward_kind == REWARD_CURRENT_STATE:
            arrs.append(("reward", env.reward_table[x]))
        for name, arr in arrs:
            if not np.all(np.isfinite(arr)):
                rep.add(f"{name}(x={x}/{env.states[x]})", "contains non-finite entries")
    if env.reward_kind == REWARD_EXPECTED_NEXT and not np.all(np.isfinite(env.reward_table)):
        rep.add("reward", "contains non-finite entries")

    if not rep.ok:
        return rep

    # re-check the induced kernel; stay arrays are clamped beyond their
    # length, so probing ages up to the longest array covers all behaviors
    max_len = max(
        env.stay_prob[x][a].size for x in range(ne) for a in range(na)
    )
    t_probe = range(min(n - 1, max_len) + 1)

    def induced(y, s, x, t, a):
        return transition_prob(env, ExtendedState(x, t), a, ExtendedState(y, s))

    def acts(x, t):
        return env.admissible_actions(x, t)

    s_max = max(t_probe) + 2
    rep.issues.extend(
        check_kernel_properties(induced, ne, t_probe, s_max, acts)
    )
    return rep
