"""Environment file format: JSON serialization of EnvSpec, plus hashing.

Probabilities and rewards may appear as numbers or decimal strings; both
parse through ``float`` so a write -> read round trip preserves every value
exactly (floats are emitted in shortest round-trip form).
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .core import (
    REWARD_CURRENT_STATE,
    REWARD_EXPECTED_NEXT,
    EnvSpec,
)

FORMAT_VERSION = 1


class EnvFormatError(ValueError):
    """Malformed env file content; the message names the offending key."""


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise EnvFormatError(f"{where}: expected a number or decimal string, got {value!r}")
    try:
        return float(value)
    except ValueError:
        raise EnvFormatError(f"{where}: cannot parse {value!r} as a number") from None


def _num_list(values, where: str) -> list[float]:
    if not isinstance(values, list) or not values:
        raise EnvFormatError(f"{where}: expected a non-empty array")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(values)]


def env_to_dict(env: EnvSpec) -> dict:
    """Canonical file representation (name-keyed maps, no metadata)."""
    ne, na = env.n_states, env.n_actions
    d: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "states": list(env.states),
        "actions": list(env.actions),
        "horizon": env.horizon,
        "kernel": {
            "stay_prob": {
                env.states[x]: {
                    env.actions[a]: list(map(float, env.stay_prob[x][a]))
                    for a in range(na)
                }
                for x in range(ne)
            },
            "jump_prob": {
                env.states[x]: {
                    env.actions[a]: {
                        env.states[y]: float(env.jump_prob[x][a][y])
                        for y in range(ne)
                        if env.jump_prob[x][a][y] != 0.0
                    }
                    for a in range(na)
                }
                for x in range(ne)
            },
        },
    }
    if env.admissible is not None:
        adm: dict[str, dict[str, list[str]]] = {}
        for (x, t), acts in sorted(env.admissible.items()):
            adm.setdefault(env.states[x], {})[str(t)] = [env.actions[a] for a in acts]
        d["admissible"] = adm
    if env.reward_kind == REWARD_CURRENT_STATE:
        d["reward"] = {
            "kind": REWARD_CURRENT_STATE,
            "table": {
                env.states[x]: list(map(float, env.reward_table[x])) for x in range(ne)
            },
        }
    else:
        d["reward"] = {
            "kind": REWARD_EXPECTED_NEXT,
            "table": env.reward_table.tolist(),
        }
    if env.terminal_same_as_reward:
        d["terminal"] = "same-as-reward"
    else:
        d["terminal"] = {
            env.states[x]: list(map(float, env.terminal_table[x])) for x in range(ne)
        }
    return d


def env_from_dict(d: dict) -> EnvSpec:
    if not isinstance(d, dict):
        raise EnvFormatError("top level: expected an object")
    for key in ("states", "actions", "horizon", "kernel", "reward", "terminal"):
        if key not in d:
            raise EnvFormatError(f"missing required key {key!r}")
    states = d["states"]
    actions = d["actions"]
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise EnvFormatError("states: expected an array of names")
    if not isinstance(actions, list) or not all(isinstance(a, str) for a in actions):
        raise EnvFormatError("actions: expected an array of names")
    if not isinstance(d["horizon"], int) or isinstance(d["horizon"], bool):
        raise EnvFormatError("horizon: expected an integer")
    sid = {s: i for i, s in enumerate(states)}
    aid = {a: i for i, a in enumerate(actions)}

    kernel = d["kernel"]
    if not isinstance(kernel, dict) or "stay_prob" not in kernel or "jump_prob" not in kernel:
        raise EnvFormatError("kernel: expected an object with stay_prob and jump_prob")

    def by_state_action(section: dict, where: str):
        if not isinstance(section, dict):
            raise EnvFormatError(f"{where}: expected an object keyed by state name")
        out = []
        for s in states:
            if s not in section:
                raise EnvFormatError(f"{where}: missing state {s!r}")
            row = section[s]
            if not isinstance(row, dict):
                raise EnvFormatError(f"{where}.{s}: expected an object keyed by action name")
            per_action = []
            for a in actions:
                if a not in row:
                    raise EnvFormatError(f"{where}.{s}: missing action {a!r}")
                per_action.append(row[a])
            out.append(per_action)
        return out

    stay_raw = by_state_action(kernel["stay_prob"], "kernel.stay_prob")
    stay = [
        [_num_list(stay_raw[x][a], f"kernel.stay_prob.{states[x]}.{actions[a]}")
         for a in range(len(actions))]
        for x in range(len(states))
    ]
    jump_raw = by_state_action(kernel["jump_prob"], "kernel.jump_prob")
    jump = []
    for x in range(len(states)):
        per_action = []
        for a in range(len(actions)):
            cell = jump_raw[x][a]
            where = f"kernel.jump_prob.{states[x]}.{actions[a]}"
            if not isinstance(cell, dict):
                raise EnvFormatError(f"{where}: expected an object keyed by destination name")
            vec = [0.0] * len(states)
            for dest, p in cell.items():
                if dest not in sid:
                    raise EnvFormatError(f"{where}: unknown destination {dest!r}")
                vec[sid[dest]] = _num(p, f"{where}.{dest}")
            per_action.append(vec)
        jump.append(per_action)

    admissible = None
    if "admissible" in d and d["admissible"] is not None:
        admissible = {}
        raw = d["admissible"]
        if not isinstance(raw, dict):
            raise EnvFormatError("admissible: expected an object keyed by state name")
        for s, per_age in raw.items():
            if s not in sid:
                raise EnvFormatError(f"admissible: unknown state {s!r}")
            if not isinstance(per_age, dict):
                raise EnvFormatError(f"admissible.{s}: expected an object keyed by age")
            for t_str, names in per_age.items():
                try:
                    t = int(t_str)
                except ValueError:
                    raise EnvFormatError(f"admissible.{s}: bad age key {t_str!r}") from None
                if not isinstance(names, list):
                    raise EnvFormatError(f"admissible.{s}.{t_str}: expected an array")
                acts = []
                for nm in names:
                    if nm not in aid:
                        raise EnvFormatError(f"admissible.{s}.{t_str}: unknown action {nm!r}")
                    acts.append(aid[nm])
                admissible[(sid[s], t)] = tuple(acts)

    reward = d["reward"]
    if not isinstance(reward, dict) or "kind" not in reward:
        raise EnvFormatError("reward: expected an object with a kind")
    kind = reward["kind"]
    if "rule" in reward:
        from .coins import reward_tables_from_rule

        if kind != REWARD_CURRENT_STATE:
            raise EnvFormatError("reward.rule: rule form implies current-state rewards")
        try:
            reward_table = reward_tables_from_rule(reward["rule"], states)
        except (ValueError, KeyError, TypeError) as e:
            raise EnvFormatError(f"reward.rule: {e}") from None
    elif kind == REWARD_CURRENT_STATE:
        table = reward.get("table")
        if not isinstance(table, dict):
            raise EnvFormatError("reward.table: expected an object keyed by state name")
        reward_table = []
        for s in states:
            if s not in table:
                raise EnvFormatError(f"reward.table: missing state {s!r}")
            reward_table.append(_num_list(table[s], f"reward.table.{s}"))
    elif kind == REWARD_EXPECTED_NEXT:
        table = reward.get("table")
        if not isinstance(table, list):
            raise EnvFormatError("reward.table: expected a nested array (n, y, t, a, dest)")
        reward_table = table
    else:
        raise EnvFormatError(f"reward.kind: unknown kind {kind!r}")

    terminal = d["terminal"]
    if terminal != "same-as-reward":
        if not isinstance(terminal, dict):
            raise EnvFormatError('terminal: expected "same-as-reward" or a table by state name')
        term = []
        for s in states:
            if s not in terminal:
                raise EnvFormatError(f"terminal: missing state {s!r}")
            term.append(_num_list(terminal[s], f"terminal.{s}"))
        terminal = term

    return EnvSpec(
        states=states,
        actions=actions,
        horizon=d["horizon"],
        stay_prob=stay,
        jump_prob=jump,
        reward_kind=kind,
        reward_table=reward_table,
        terminal=terminal,
        admissible=admissible,
    )


def env_hash(env: EnvSpec) -> str:
    """Stable content hash of the canonical file representation."""
    payload = json.dumps(env_to_dict(env), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def write_env(env: EnvSpec, path, meta: dict | None = None) -> None:
    d = env_to_dict(env)
    if meta:
        d["meta"] = meta
    with open(path, "w") as f:
        json.dump(d, f, indent=2)
        f.write("\n")


def read_env(path) -> EnvSpec:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise EnvFormatError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}") from e
    d.pop("meta", None)
    try:
        return env_from_dict(d)
    except EnvFormatError as e:
        raise EnvFormatError(f"{path}: {e}") from None
