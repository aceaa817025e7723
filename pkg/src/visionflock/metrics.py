"""Set-to-set tracking error (OSPA) and inter-agent distance statistics."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, StatsError


def ospa_distance(estimates, truth, cutoff: float = 2.0, order: float = 1.0) -> float:
    """Optimal subpattern assignment distance between two planar point sets.

    Assigns the smaller set to the larger with per-point cost
    ``min(cutoff, distance)**order``, charges ``cutoff**order`` per unmatched
    point, averages over the larger cardinality, and takes the 1/order root.
    Two empty sets have distance zero.
    """
    if cutoff <= 0:
        raise ConfigError(f"cutoff must be > 0, got {cutoff}")
    if order < 1:
        raise ConfigError(f"order must be >= 1, got {order}")
    X = np.asarray(estimates, dtype=float).reshape(-1, 2)
    Y = np.asarray(truth, dtype=float).reshape(-1, 2)
    m, n = len(X), len(Y)
    if m == 0 and n == 0:
        return 0.0
    if m > n:
        X, Y = Y, X
        m, n = n, m
    total = (cutoff**order) * (n - m)
    if m > 0:
        dists = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
        costs = np.minimum(dists, cutoff) ** order
        rows, cols = linear_sum_assignment(costs)
        total += float(costs[rows, cols].sum())
    return float((total / n) ** (1.0 / order))


@dataclass(frozen=True)
class InterAgentStats:
    """Distance statistics over a run: scalars plus per-step series."""

    min_distance: float
    mean_distance: float
    per_step_min: np.ndarray
    per_step_mean: np.ndarray
    per_step_max: np.ndarray


def inter_agent_stats(pair_distances: np.ndarray) -> InterAgentStats:
    """Summarize a (steps, pairs) matrix of pairwise distances.

    Raises:
        StatsError: fewer than one pair (single agent).
    """
    d = np.asarray(pair_distances, dtype=float)
    if d.ndim != 2 or d.shape[1] < 1:
        raise StatsError("inter-agent statistics require at least two agents")
    return InterAgentStats(
        min_distance=float(d.min()),
        mean_distance=float(d.mean()),
        per_step_min=d.min(axis=1),
        per_step_mean=d.mean(axis=1),
        per_step_max=d.max(axis=1),
    )
