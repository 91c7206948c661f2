"""Batch reward statistics and Monte Carlo aggregation across replications,
with the CSV formats consumed downstream.

Per replication, episode totals are reduced to per-batch average/min/max
(trailing partial batches dropped). Across replications each batch
statistic is summarized by its mean and a 95% normal-approximation
confidence half-width 1.96 * s / sqrt(R); identical values short-circuit
to an exact zero half-width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .qlearn import TrainConfig, train
from .rng import replication_seed

Z_95 = 1.96


@dataclass
class MetricsSeries:
    """Single-replication batch statistics."""

    batch_size: int
    avg: np.ndarray
    min: np.ndarray
    max: np.ndarray

    def __len__(self):
        return len(self.avg)


@dataclass
class AggregateSeries:
    """Cross-replication mean and CI half-width per batch statistic.
    CI arrays are None when only one replication was aggregated."""

    batch_size: int
    replications: int
    avg_mean: np.ndarray
    avg_ci95: np.ndarray | None
    min_mean: np.ndarray
    min_ci95: np.ndarray | None
    max_mean: np.ndarray
    max_ci95: np.ndarray | None

    def __len__(self):
        return len(self.avg_mean)


def batch_metrics(rewards, batch_size: int) -> MetricsSeries:
    """Average, min and max of episode totals per full batch."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    rewards = np.asarray(rewards, dtype=float)
    if rewards.ndim != 1:
        raise ValueError("rewards must be a 1-d array")
    n_batches = rewards.size // batch_size
    if n_batches == 0:
        empty = np.empty(0)
        return MetricsSeries(batch_size, empty, empty.copy(), empty.copy())
    chunks = rewards[: n_batches * batch_size].reshape(n_batches, batch_size)
    return MetricsSeries(
        batch_size=batch_size,
        avg=chunks.mean(axis=1),
        min=chunks.min(axis=1),
        max=chunks.max(axis=1),
    )


def _ci_half_width(stacked: np.ndarray) -> np.ndarray:
    """Per-column 1.96 s/sqrt(R); exactly 0 for columns of identical values."""
    r = stacked.shape[0]
    out = np.empty(stacked.shape[1])
    for j in range(stacked.shape[1]):
        col = stacked[:, j]
        if (col == col[0]).all():
            out[j] = 0.0
        else:
            out[j] = Z_95 * float(np.std(col, ddof=1)) / np.sqrt(r)
    return out


def aggregate_series(series: list[MetricsSeries]) -> AggregateSeries:
    """Combine per-replication batch statistics into means and CI bands."""
    if not series:
        raise ValueError("nothing to aggregate")
    b = series[0].batch_size
    length = len(series[0])
    for s in series[1:]:
        if s.batch_size != b:
            raise ValueError("replications disagree on batch size")
        if len(s) != length:
            raise ValueError("replications disagree on batch count")
    r = len(series)
    avg = np.stack([s.avg for s in series]) if length else np.empty((r, 0))
    mins = np.stack([s.min for s in series]) if length else np.empty((r, 0))
    maxs = np.stack([s.max for s in series]) if length else np.empty((r, 0))
    with_ci = r >= 2
    return AggregateSeries(
        batch_size=b,
        replications=r,
        avg_mean=avg.mean(axis=0),
        avg_ci95=_ci_half_width(avg) if with_ci else None,
        min_mean=mins.mean(axis=0),
        min_ci95=_ci_half_width(mins) if with_ci else None,
        max_mean=maxs.mean(axis=0),
        max_ci95=_ci_half_width(maxs) if with_ci else None,
    )


def monte_carlo_curves(
    env,
    config: TrainConfig,
    replications: int,
    batch_size: int,
) -> AggregateSeries:
    """Independent seeded training runs reduced to aggregated batch curves.

    Replication r trains with a seed derived from (config.seed, r);
    aggregation is a deterministic reduce over replication order.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    series = []
    for r in range(replications):
        cfg = config.with_seed(replication_seed(config.seed, r))
        result = train(env, cfg)
        series.append(batch_metrics(result.rewards, batch_size))
    return aggregate_series(series)


# -- CSV formats ---------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path, meta: dict | None, header: list[str], rows) -> None:
    with open(path, "w") as f:
        if meta is not None:
            f.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")


def _read_csv(path, expected_header: list[str]):
    with open(path) as f:
        lines = f.read().splitlines()
    meta = None
    i = 0
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:].strip())
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: line 1: bad metadata comment ({e.msg})") from e
        i = 1
    if i >= len(lines) or lines[i].split(",") != expected_header:
        raise ValueError(
            f"{path}: line {i + 1}: expected header {','.join(expected_header)!r}"
        )
    rows = []
    for ln, line in enumerate(lines[i + 1:], start=i + 2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(expected_header):
            raise ValueError(f"{path}: line {ln}: expected {len(expected_header)} fields")
        rows.append((ln, cells))
    return meta, rows


REWARDS_HEADER = ["episode", "total_reward"]
ERRORS_HEADER = ["episode", "sup_error"]
METRICS_HEADER = [
    "batch_index",
    "avg_mean",
    "avg_ci95",
    "min_mean",
    "min_ci95",
    "max_mean",
    "max_ci95",
]


def write_rewards_csv(path, rewards, meta: dict | None = None) -> None:
    _write_csv(
        path, meta, REWARDS_HEADER,
        ((str(i), _fmt(v)) for i, v in enumerate(rewards)),
    )


def read_rewards_csv(path):
    meta, rows = _read_csv(path, REWARDS_HEADER)
    values = np.empty(len(rows))
    for k, (ln, cells) in enumerate(rows):
        try:
            episode = int(cells[0])
            values[k] = float(cells[1])
        except ValueError:
            raise ValueError(f"{path}: line {ln}: malformed row {cells!r}") from None
        if episode != k:
            raise ValueError(f"{path}: line {ln}: episodes out of order")
    return values, meta


def write_errors_csv(path, errors, meta: dict | None = None) -> None:
    _write_csv(
        path, meta, ERRORS_HEADER,
        ((str(i), _fmt(v)) for i, v in enumerate(errors)),
    )


def write_metrics_csv(path, agg: AggregateSeries, meta: dict | None = None) -> None:
    def rows():
        for k in range(len(agg)):
            yield (
                str(k),
                _fmt(agg.avg_mean[k]),
                _fmt(agg.avg_ci95[k]) if agg.avg_ci95 is not None else "",
                _fmt(agg.min_mean[k]),
                _fmt(agg.min_ci95[k]) if agg.min_ci95 is not None else "",
                _fmt(agg.max_mean[k]),
                _fmt(agg.max_ci95[k]) if agg.max_ci95 is not None else "",
            )

    _write_csv(path, meta, METRICS_HEADER, rows())


def read_metrics_csv(path):
    meta, rows = _read_csv(path, METRICS_HEADER)
    n = len(rows)
    avg_mean = np.empty(n)
    min_mean = np.empty(n)
    max_mean = np.empty(n)
    cis: list[np.ndarray | None] = [np.empty(n), np.empty(n), np.empty(n)]
    has_ci = True
    for k, (ln, cells) in enumerate(rows):
        try:
            if int(cells[0]) != k:
                raise ValueError(f"{path}: line {ln}: batch indices out of order")
            avg_mean[k] = float(cells[1])
            min_mean[k] = float(cells[3])
            max_mean[k] = float(cells[5])
            for which, col in enumerate((2, 4, 6)):
                if cells[col] == "":
                    has_ci = False
                else:
                    cis[which][k] = float(cells[col])
        except ValueError as e:
            if str(e).startswith(str(path)):
                raise
            raise ValueError(f"{path}: line {ln}: malformed row {cells!r}") from None
    batch_size = int(meta["batch_size"]) if meta and "batch_size" in meta else 0
    replications = int(meta["replications"]) if meta and "replications" in meta else 0
    return (
        AggregateSeries(
            batch_size=batch_size,
            replications=replications,
            avg_mean=avg_mean,
            avg_ci95=cis[0] if has_ci else None,
            min_mean=min_mean,
            min_ci95=cis[1] if has_ci else None,
            max_mean=max_mean,
            max_ci95=cis[2] if has_ci else None,
        ),
        meta,
    )
