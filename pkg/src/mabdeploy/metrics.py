"""Binary classification metrics over one batch of scores.

All functions take parallel ``scores`` (reals in [0, 1]) and ``labels``
(0/1) sequences and raise :class:`DegenerateBatch` when the metric is
undefined for the label mix of the batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import MetricKind


class DegenerateBatch(ValueError):
    """The batch lacks a class the metric needs."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _as_arrays(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValueError("scores and labels must be 1-d and of equal length")
    if s.size == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(s)) or s.min() < 0.0 or s.max() > 1.0:
        raise ValueError("scores must be finite and within [0, 1]")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary 0/1")
    return s, y.astype(np.int8)


@dataclass(frozen=True)
class ScoredBatch:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s, y = _as_arrays(self.scores, self.labels)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y)

    def metric(self, kind: MetricKind, threshold: float = 0.5) -> float:
        return compute_metric(kind, self.scores, self.labels, threshold)


def confusion_counts(scores, labels, threshold: float = 0.5) -> ConfusionCounts:
    s, y = _as_arrays(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def balanced_accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Mean of TPR and TNR, predicting positive iff score >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    cc = confusion_counts(scores, labels, threshold)
    if cc.tp + cc.fn == 0 or cc.tn + cc.fp == 0:
        raise DegenerateBatch("balanced accuracy needs both classes")
    return (cc.tp / (cc.tp + cc.fn) + cc.tn / (cc.tn + cc.fp)) / 2


def pr_auc(scores, labels) -> float:
    """Step-wise average precision: sum over thresholds of (R_k - R_{k-1}) * P_k.

    Tied scores share one threshold, so the result does not depend on how
    ties are ordered. No interpolation between operating points.
    """
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DegenerateBatch("PR-AUC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    # last index of each run of equal scores is an operating point
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = tp[last]
    precision = tp / (last + 1)
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(recall_gain * precision))


def roc_auc(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg); ties count one half."""
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateBatch("ROC-AUC needs both classes")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def compute_metric(kind: MetricKind, scores, labels, threshold: float = 0.5) -> float:
    kind = MetricKind(kind)
    if kind is MetricKind.BALANCED_ACCURACY:
        return balanced_accuracy(scores, labels, threshold)
    if kind is MetricKind.PR_AUC:
        return pr_auc(scores, labels)
    return roc_auc(scores, labels)
