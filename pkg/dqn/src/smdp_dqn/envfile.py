"""Reader for smdp environment files.

Parses the stay/jump kernel, rewards (table, coins rule, or
per-destination form) and terminal table into a sampling-oriented model.
Probabilities may be numbers or decimal strings.
"""

from __future__ import annotations

import json

import numpy as np

PROB_TOL = 1e-12


class EnvFileError(ValueError):
    pass


def _num(v, where):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise EnvFileError(f"{where}: cannot parse {v!r} as a number") from None


def _clamped(arr, t):
    return arr[t] if t < len(arr) else arr[-1]


class EnvModel:
    """Environment dynamics decoded from a file: states, actions, horizon,
    per-age stay probabilities (final entry reused), jump destinations,
    rewards and terminal values."""

    def __init__(self, states, actions, horizon, stay, jump, reward_kind,
                 reward, terminal):
        self.states = list(states)
        self.actions = list(actions)
        self.horizon = int(horizon)
        self.stay = stay          # [x][a] -> list over ages
        self.jump = jump          # [x][a] -> length-|E| vector
        self.reward_kind = reward_kind
        self._reward = reward     # rows [x] or array (N, E, T, A, E)
        self._terminal = terminal  # rows [x]
        self._validate()

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    def _validate(self):
        if self.horizon < 1:
            raise EnvFileError("horizon must be >= 1")
        for x in range(self.n_states):
            for a in range(self.n_actions):
                stay = self.stay[x][a]
                if not stay or any(s < 0.0 or s > 1.0 for s in stay):
                    raise EnvFileError(f"stay probabilities at (x={x}, a={a}) outside [0, 1]")
                jump = self.jump[x][a]
                if jump[x] != 0.0 or any(p < 0.0 for p in jump):
                    raise EnvFileError(f"jump row at (x={x}, a={a}) malformed")
                if not all(s == 1.0 for s in stay) and abs(sum(jump) - 1.0) > PROB_TOL:
                    raise EnvFileError(f"jump row at (x={x}, a={a}) sums to {sum(jump)!r}")

    def stay_prob(self, x, a, t):
        return _clamped(self.stay[x][a], t)

    def reward(self, n, x, t, a):
        if self.reward_kind == "current-state":
            return _clamped(self._reward[x], t)
        rbar = self._reward
        t_idx = min(t, rbar.shape[2] - 1)
        stay = self.stay_prob(x, a, t)
        total = 0.0
        for dest in range(self.n_states):
            p = stay if dest == x else (1.0 - stay) * self.jump[x][a][dest]
            if p != 0.0:
                total += float(rbar[n, x, t_idx, a, dest]) * p
        return total

    def terminal(self, x, t):
        return _clamped(self._terminal[x], t)

    def step(self, x, t, a, u_stay, u_dest):
        """Next (state, age) from two uniform draws."""
        if u_stay < self.stay_prob(x, a, t):
            return x, t + 1
        acc = 0.0
        dest = x
        for y in range(self.n_states):
            p = self.jump[x][a][y]
            if p > 0.0:
                acc += p
                dest = y
                if u_dest < acc:
                    break
        return dest, 0

    @classmethod
    def from_dict(cls, d):
        for key in ("states", "actions", "horizon", "kernel", "reward", "terminal"):
            if key not in d:
                raise EnvFileError(f"missing required key {key!r}")
        if d.get("admissible"):
            raise EnvFileError("admissibility restrictions are not supported here")
        states, actions = d["states"], d["actions"]
        ne, na = len(states), len(actions)
        kernel = d["kernel"]
        stay, jump = [], []
        for x, s in enumerate(states):
            stay_row, jump_row = [], []
            for a_name in actions:
                arr = kernel["stay_prob"][s][a_name]
                stay_row.append([_num(v, f"stay_prob.{s}.{a_name}") for v in arr])
                vec = [0.0] * ne
                for dest, p in kernel["jump_prob"][s][a_name].items():
                    vec[states.index(dest)] = _num(p, f"jump_prob.{s}.{a_name}.{dest}")
                jump_row.append(vec)
            stay.append(stay_row)
            jump.append(jump_row)

        reward_spec = d["reward"]
        kind = reward_spec.get("kind", "current-state")
        if "rule" in reward_spec:
            rule = reward_spec["rule"]
            if rule.get("type") != "coins" or ne != 2:
                raise EnvFileError(f"unsupported reward rule {rule!r}")
            t_cheat, r_cheat = int(rule["t_cheat"]), float(rule["r_cheat"])
            reward = [[1.0] * (t_cheat + 1) + [r_cheat], [-1.0]]
            kind = "current-state"
        elif kind == "current-state":
            reward = [
                [_num(v, f"reward.table.{s}") for v in reward_spec["table"][s]]
                for s in states
            ]
        elif kind == "expected-next-state":
            reward = np.asarray(reward_spec["table"], dtype=float)
            if reward.shape != (d["horizon"], ne, reward.shape[2], na, ne):
                raise EnvFileError(f"bad per-destination reward shape {reward.shape}")
        else:
            raise EnvFileError(f"unknown reward kind {kind!r}")

        term_spec = d["terminal"]
        if term_spec == "same-as-reward":
            if kind != "current-state":
                raise EnvFileError('"same-as-reward" needs current-state rewards')
            terminal = reward
        else:
            terminal = [
                [_num(v, f"terminal.{s}") for v in term_spec[s]] for s in states
            ]
        return cls(states, actions, d["horizon"], stay, jump, kind, reward, terminal)


def read_env_model(path) -> EnvModel:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise EnvFileError(f"{path}: invalid JSON at line {e.lineno}") from e
    try:
        return EnvModel.from_dict(d)
    except EnvFileError as e:
        raise EnvFileError(f"{path}: {e}") from None
