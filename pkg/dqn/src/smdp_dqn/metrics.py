"""Batch-curve reduction and the CSV formats shared with the tabular
toolkit (identical schemas, so either tool can aggregate the other's
output)."""

from __future__ import annotations

import json

import numpy as np

REWARDS_HEADER = "episode,total_reward"
METRICS_HEADER = "batch_index,avg_mean,avg_ci95,min_mean,min_ci95,max_mean,max_ci95"
Z_95 = 1.96


def batch_curve(rewards, batch_size: int):
    """(avg, min, max) per full batch; trailing partial batch dropped."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    rewards = np.asarray(rewards, dtype=float)
    n = rewards.size // batch_size
    chunks = rewards[: n * batch_size].reshape(n, batch_size)
    return chunks.mean(axis=1), chunks.min(axis=1), chunks.max(axis=1)


def _ci(stacked: np.ndarray) -> np.ndarray:
    out = np.empty(stacked.shape[1])
    for j in range(stacked.shape[1]):
        col = stacked[:, j]
        out[j] = 0.0 if (col == col[0]).all() else \
            Z_95 * float(np.std(col, ddof=1)) / np.sqrt(stacked.shape[0])
    return out


def aggregate_runs(reward_arrays, batch_size: int):
    """Monte Carlo summary across runs: per-batch mean and 95% CI
    half-width of each statistic. CI columns are None for a single run."""
    curves = [batch_curve(r, batch_size) for r in reward_arrays]
    avg = np.stack([c[0] for c in curves])
    mins = np.stack([c[1] for c in curves])
    maxs = np.stack([c[2] for c in curves])
    many = avg.shape[0] >= 2
    return {
        "avg_mean": avg.mean(axis=0),
        "avg_ci95": _ci(avg) if many else None,
        "min_mean": mins.mean(axis=0),
        "min_ci95": _ci(mins) if many else None,
        "max_mean": maxs.mean(axis=0),
        "max_ci95": _ci(maxs) if many else None,
    }


def write_rewards_csv(path, rewards, meta: dict | None = None) -> None:
    with open(path, "w") as f:
        if meta is not None:
            f.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        f.write(REWARDS_HEADER + "\n")
        for i, v in enumerate(rewards):
            f.write(f"{i},{float(v)!r}\n")


def read_rewards_csv(path):
    with open(path) as f:
        lines = f.read().splitlines()
    meta = None
    i = 0
    if lines and lines[0].startswith("#"):
        meta = json.loads(lines[0][1:].strip())
        i = 1
    if i >= len(lines) or lines[i] != REWARDS_HEADER:
        raise ValueError(f"{path}: expected header {REWARDS_HEADER!r}")
    values = []
    for line in lines[i + 1:]:
        if line:
            values.append(float(line.split(",")[1]))
    return np.asarray(values), meta


def write_metrics_csv(path, agg: dict, meta: dict | None = None) -> None:
    def cell(arr, k):
        return "" if arr is None else repr(float(arr[k]))

    with open(path, "w") as f:
        if meta is not None:
            f.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        f.write(METRICS_HEADER + "\n")
        for k in range(len(agg["avg_mean"])):
            f.write(
                f"{k},{float(agg['avg_mean'][k])!r},{cell(agg['avg_ci95'], k)},"
                f"{float(agg['min_mean'][k])!r},{cell(agg['min_ci95'], k)},"
                f"{float(agg['max_mean'][k])!r},{cell(agg['max_ci95'], k)}\n"
            )


def read_metrics_csv(path):
    with open(path) as f:
        lines = f.read().splitlines()
    meta = None
    i = 0
    if lines and lines[0].startswith("#"):
        meta = json.loads(lines[0][1:].strip())
        i = 1
    if i >= len(lines) or lines[i] != METRICS_HEADER:
        raise ValueError(f"{path}: expected header {METRICS_HEADER!r}")
    cols = {name: [] for name in METRICS_HEADER.split(",")}
    has_ci = True
    for line in lines[i + 1:]:
        if not line:
            continue
        cells = line.split(",")
        for name, value in zip(METRICS_HEADER.split(","), cells):
            if value == "":
                has_ci = False
                cols[name].append(np.nan)
            else:
                cols[name].append(float(value))
    out = {}
    for name in ("avg_mean", "avg_ci95", "min_mean", "min_ci95", "max_mean", "max_ci95"):
        arr = np.asarray(cols[name])
        out[name] = None if (not has_ci and name.endswith("ci95")) else arr
    return out, meta
