"""Exact marginal association probabilities by exhaustive enumeration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .model import DEFAULT_EVENT_BUDGET, BeliefTable, WeightMatrix, event_table


@dataclass(frozen=True, eq=False)
class ExactMarginals(BeliefTable):
    """Marginals summed over every consistent event; ``partition_constant`` is the total mass."""

    partition_constant: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.partition_constant >= 1.0:
            raise ValueError(f"partition constant {self.partition_constant} < 1")


def exact_marginals(w: WeightMatrix, budget: int = DEFAULT_EVENT_BUDGET) -> ExactMarginals:
    """Enumerate all consistent events and sum their weights per association.

    Raises :class:`~bpassoc.errors.BudgetExceeded` when the problem has more
    than ``budget`` events.
    """
    assign, weight = event_table(w, budget=budget)
    n, m = w.shape
    z = math.fsum(weight)

    target = np.empty((n, m + 1))
    for i in range(n):
        target[i] = np.bincount(assign[:, i], weights=weight, minlength=m + 1)
    meas = np.empty((m, n + 1))
    for j in range(1, m + 1):
        hit = assign == j
        claimed = hit.any(axis=1)
        meas[j - 1, 0] = math.fsum(weight[~claimed])
        for i in range(n):
            meas[j - 1, i + 1] = math.fsum(weight[hit[:, i]])

    return ExactMarginals(
        target_marginals=target / target.sum(axis=1, keepdims=True),
        measurement_marginals=meas / meas.sum(axis=1, keepdims=True) if m else meas,
        partition_constant=z,
    )


def max_marginal_error(test: BeliefTable, ref: BeliefTable) -> np.ndarray:
    """Per-target largest absolute difference over the target-side marginal vector."""
    a = test.target_marginals
    b = ref.target_marginals
    if a.shape != b.shape:
        raise ShapeMismatch(f"belief shapes differ: {a.shape} vs {b.shape}")
    return np.abs(a - b).max(axis=1)


def average_max_error(test: BeliefTable, ref: BeliefTable) -> float:
    """Per-target maximum error averaged over targets."""
    return float(np.mean(max_marginal_error(test, ref)))
