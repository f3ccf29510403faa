"""Ranking and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import average_precision_score


def roc_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney rank statistic: P(pos > neg) with ties counted as one half."""
    pos = np.asarray(pos_scores, float).ravel()
    neg = np.asarray(neg_scores, float).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC needs at least one positive and one negative score")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


def average_precision(pos_scores, neg_scores) -> float:
    pos = np.asarray(pos_scores, float).ravel()
    neg = np.asarray(neg_scores, float).ravel()
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return float(average_precision_score(y, np.concatenate([pos, neg])))


def hits_at_k(pos_scores, neg_scores, k: int) -> float:
    """Fraction of positives scoring strictly above the k-th best negative."""
    pos = np.asarray(pos_scores, float).ravel()
    neg = np.asarray(neg_scores, float).ravel()
    if len(pos) == 0:
        raise ValueError("no positive scores")
    if len(neg) < k:
        return 1.0
    kth = np.sort(neg)[-k]
    return float(np.mean(pos > kth))


def accuracy(pred, target) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    if len(target) == 0:
        raise ValueError("empty evaluation set")
    return float(np.mean(pred == target))


@dataclass
class Metrics:
    auc: float | None = None
    ap: float | None = None
    hits: dict[int, float] = field(default_factory=dict)
    accuracy: float | None = None
    history: list[tuple[int, str, str, float]] = field(default_factory=list)

    def log(self, epoch: int, split: str, metric: str, value: float) -> None:
        self.history.append((epoch, split, metric, float(value)))

    def curve(self, split: str, metric: str) -> list[tuple[int, float]]:
        return [(e, v) for e, s, m, v in self.history if s == split and m == metric]

    def to_csv(self) -> str:
        lines = ["epoch,split,metric,value"]
        lines += [f"{e},{s},{m},{v:.10g}" for e, s, m, v in self.history]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict[str, float]:
        out = {}
        if self.auc is not None:
            out["auc"] = self.auc
        if self.ap is not None:
            out["ap"] = self.ap
        for k, v in sorted(self.hits.items()):
            out[f"hits@{k}"] = v
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
        return out
