"""Static reward-curve figures from metrics CSVs: per-batch statistic
versus batch index, with shaded 95% confidence bands when present."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import read_metrics_csv

STATISTICS = {"avg": "average", "min": "minimum", "max": "maximum"}


def plot_metrics(paths, output, statistic: str = "avg", labels=None, title=None):
    """One curve per metrics CSV; emits a PNG (or whatever the extension
    of ``output`` selects)."""
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {sorted(STATISTICS)}")
    if labels is not None and len(labels) != len(paths):
        raise ValueError("need one label per input file")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, path in enumerate(paths):
        agg, _meta = read_metrics_csv(path)
        mean = agg[f"{statistic}_mean"]
        ci = agg[f"{statistic}_ci95"]
        k = np.arange(len(mean))
        label = labels[i] if labels else str(path)
        (line,) = ax.plot(k, mean, label=label)
        if ci is not None:
            ax.fill_between(k, mean - ci, mean + ci, alpha=0.25,
                            color=line.get_color(), linewidth=0)
    ax.set_xlabel("batch index")
    ax.set_ylabel(f"{STATISTICS[statistic]} total reward per batch")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(output, dpi=150)
    plt.close(fig)
