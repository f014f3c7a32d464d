"""Rewards derived from consecutive metric observations.

``binary_improvement`` drives the bandit policies. The regression rewards are
plain functions; nothing in the simulator calls them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass


class RewardKind(str, enum.Enum):
    BINARY_IMPROVEMENT = "binary_improvement"
    MSE_REDUCTION = "mse_reduction"
    R2_IMPROVEMENT = "r2_improvement"
    THRESHOLDED_REDUCTION = "thresholded_reduction"


@dataclass(frozen=True)
class RewardSpec:
    r_pos: float = 1.0
    r_neg: float = 0.0
    kind: RewardKind = RewardKind.BINARY_IMPROVEMENT
    threshold: float = 0.0  # only read by THRESHOLDED_REDUCTION

    def __post_init__(self):
        if not self.r_pos > self.r_neg:
            raise ValueError("r_pos must exceed r_neg")


DEFAULT_REWARD = RewardSpec()


def binary_improvement(current: float, previous: float | None, spec: RewardSpec = DEFAULT_REWARD) -> float:
    """r_pos iff ``current`` strictly beats ``previous``; no previous metric earns r_neg."""
    if previous is None:
        return spec.r_neg
    return spec.r_pos if current > previous else spec.r_neg


def mse_reduction(current_mse: float, previous_mse: float) -> float:
    return -(current_mse - previous_mse)


def r2_improvement(current_r2: float, previous_r2: float) -> float:
    return current_r2 - previous_r2


def thresholded_reduction(error_reduction: float, threshold: float) -> float:
    return 1.0 if error_reduction > threshold else 0.0
