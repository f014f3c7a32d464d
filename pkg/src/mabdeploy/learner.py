"""Built-in scorer and the synthetic drifting stream it is trained on.

The learner is a plain logistic model fit by full-batch gradient descent on
standardized features. Overfitting is injected by blending in a 1-nearest-
neighbour lookup over a memorized subset of the training rows: perfect on
those rows, close to useless on new data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from scipy.special import expit

from .core import SyntheticScenario

EPOCHS = 500
STEP = 0.1


class DegenerateTrainingSet(ValueError):
    pass


@dataclass
class LogisticScorer:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float
    overfit_strength: float = 0.0
    memory: cKDTree | None = None
    memory_labels: np.ndarray | None = None

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def linear_score(self, X) -> np.ndarray:
        return expit(self.standardize(X) @ self.weights + self.bias)

    def score(self, X) -> np.ndarray:
        p = self.linear_score(X)
        if self.memory is None or self.overfit_strength == 0:
            return p
        _, nearest = self.memory.query(self.standardize(X), k=1)
        recalled = self.memory_labels[nearest].astype(float)
        return (1 - self.overfit_strength) * p + self.overfit_strength * recalled


def fit_logistic(Z: np.ndarray, y: np.ndarray, epochs: int = EPOCHS, step: float = STEP):
    """Gradient descent on mean log-loss from zero weights; ``Z`` is already standardized."""
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    yf = y.astype(float)
    for _ in range(epochs):
        err = expit(Z @ w + b) - yf
        w -= step * (Z.T @ err) / n
        b -= step * err.mean()
    return w, b


def train_scorer(X, y, overfit_strength: float = 0.0, seed=0) -> LogisticScorer:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int8)
    if X.shape[0] == 0:
        raise DegenerateTrainingSet("empty training split")
    if y.min() == y.max():
        raise DegenerateTrainingSet("training split has a single class")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    w, b = fit_logistic(Z, y)
    scorer = LogisticScorer(mean, scale, w, float(b), float(overfit_strength))
    if overfit_strength > 0:
        rng = np.random.default_rng(seed)
        k = max(1, int(round(overfit_strength * len(y))))
        rows = np.sort(rng.choice(len(y), size=k, replace=False))
        scorer.memory = cKDTree(Z[rows])
        scorer.memory_labels = y[rows]
    return scorer


def _intercept_for(prevalence: float, margin: np.ndarray) -> float:
    return brentq(lambda b: expit(margin + b).mean() - prevalence, -60.0, 60.0)


def generate_stream(scenario: SyntheticScenario, num_chunks: int, rng: np.random.Generator):
    """Features and labels for ``num_chunks`` consecutive chunks of a drifting logistic concept.

    At each chunk the true coefficient vector takes a random step of length
    ``drift_schedule[t] * signal_strength``; the intercept is re-solved per
    chunk so prevalence stays at ``class_imbalance``.
    """
    d, n = scenario.num_features, scenario.examples_per_chunk
    coef = rng.normal(size=d)
    coef *= scenario.signal_strength / np.linalg.norm(coef)
    xs, ys = [], []
    for t in range(num_chunks):
        step = rng.normal(size=d)
        coef = coef + scenario.drift_schedule[t] * scenario.signal_strength * step / np.linalg.norm(step)
        X = rng.normal(size=(n, d))
        margin = X @ coef
        p = expit(margin + _intercept_for(scenario.class_imbalance, margin))
        xs.append(X)
        ys.append((rng.random(n) < p).astype(np.int8))
    return np.vstack(xs), np.concatenate(ys)
