"""Figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import Metrics  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_training(metrics: Metrics, path) -> Path:
    """Training loss and validation score per epoch on twin axes."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    loss = metrics.curve("train", "loss")
    if loss:
        ax.plot(*zip(*loss), color="tab:blue", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    other = ax.twinx()
    for metric in ("auc", "accuracy"):
        pts = metrics.curve("valid", metric)
        if pts:
            other.plot(*zip(*pts), color="tab:orange", label=f"valid {metric}")
            other.set_ylabel(f"valid {metric}")
    handles = ax.get_legend_handles_labels()[0] + other.get_legend_handles_labels()[0]
    if handles:
        ax.legend(handles=handles, loc="center right", fontsize=8)
    return _save(fig, path)


def plot_sweep(values, scores, path, xlabel="d_max", ylabel="valid AUC") -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(values, scores, marker="o")
    ax.set_xticks(list(values))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def plot_bench(ledgers, path) -> Path:
    """Stacked per-phase wall-clock bars, one bar per method."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    phases = sorted({p for l in ledgers for p in l.seconds})
    names = [l.method for l in ledgers]
    bottom = [0.0] * len(ledgers)
    for phase in phases:
        vals = [l.seconds.get(phase, 0.0) for l in ledgers]
        ax.bar(names, vals, bottom=bottom, label=phase)
        bottom = [b + v for b, v in zip(bottom, vals)]
    for i, l in enumerate(ledgers):
        ax.annotate(f"{l.gnn_forward_count} fwd", (i, bottom[i]), ha="center", va="bottom",
                    fontsize=8)
    ax.set_ylabel("seconds")
    ax.legend(fontsize=8)
    return _save(fig, path)
