"""Localization accuracy metrics and empirical CDFs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    ger: float
    gde: float
    n_trials: int = 1


def rmse(estimates, truth, sensor_ids) -> float:
    """Root mean square position error over ``sensor_ids`` for one trial."""
    sensor_ids = np.asarray(sensor_ids, dtype=np.int64)
    if sensor_ids.size == 0:
        raise ValueError("rmse needs at least one sensor")
    err = np.asarray(estimates, float)[sensor_ids] - np.asarray(truth, float)[sensor_ids]
    return float(np.sqrt(np.sum(err * err) / sensor_ids.size))


def squared_error_sum(estimates, truth, sensor_ids) -> float:
    sensor_ids = np.asarray(sensor_ids, dtype=np.int64)
    err = np.asarray(estimates, float)[sensor_ids] - np.asarray(truth, float)[sensor_ids]
    return float(np.sum(err * err))


def _pair_distances(est_pos, true_pos, node_ids):
    node_ids = np.asarray(node_ids, dtype=np.int64)
    if node_ids.size < 2:
        raise ValueError("pairwise metrics need at least two nodes")
    i, j = np.triu_indices(node_ids.size, k=1)
    e = np.asarray(est_pos, float)[node_ids]
    t = np.asarray(true_pos, float)[node_ids]
    d_hat = np.hypot(*(e[i] - e[j]).T)
    d = np.hypot(*(t[i] - t[j]).T)
    return d_hat, d


class CoincidentNodesError(ValueError):
    """Two nodes share a true position, so relative distance error is undefined."""


def ger(est_pos, true_pos, node_ids) -> float:
    """Global energy ratio; the pair-count normalizer sits outside the root."""
    d_hat, d = _pair_distances(est_pos, true_pos, node_ids)
    if np.any(d == 0):
        raise CoincidentNodesError("GER undefined: two nodes share a true position")
    return float(np.sqrt(np.sum(((d_hat - d) / d) ** 2)) / d.size)


def gde(est_pos, true_pos, node_ids, comm_range: float) -> float:
    """Global distance error: RMS pairwise-distance error as a fraction of R."""
    if not comm_range > 0:
        raise ValueError(f"comm_range must be positive, got {comm_range}")
    d_hat, d = _pair_distances(est_pos, true_pos, node_ids)
    return float(np.sqrt(np.mean((d_hat - d) ** 2)) / comm_range)


@dataclass(frozen=True)
class EcdfTable:
    values: np.ndarray
    probs: np.ndarray

    def __call__(self, x) -> np.ndarray | float:
        """P(X <= x) under the step function."""
        p = np.searchsorted(self.values, x, side="right") / self.values.size
        return float(p) if np.ndim(p) == 0 else p

    def rows(self):
        return zip(self.values.tolist(), self.probs.tolist())

    def __len__(self):
        return self.values.size


def ecdf(values) -> EcdfTable:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("ecdf of an empty sample")
    return EcdfTable(v, np.arange(1, v.size + 1) / v.size)
