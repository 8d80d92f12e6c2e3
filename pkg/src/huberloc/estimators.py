"""Per-link cost functions and their analytic gradients.

A residual is ``e = ||theta_i - theta_j|| - r_ij`` (estimated distance minus
measured range). Four costs are supported:

=================  ===========================================
``HUBER_RELAXED``  0 for e <= 0, e^2 below K, 2Ke - K^2 above
``HUBER_ORIGINAL`` symmetric Huber with the same 2K slope
``NLS_ORIGINAL``   e^2
``NLS_RELAXED``    0 for e <= 0, e^2 otherwise
=================  ===========================================

The relaxed variants never penalize a range that is longer than the
estimated distance, which is what a positive NLOS bias produces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# classical 95%-efficiency Huber constant
DEFAULT_HUBER_ALPHA = 1.345


class EstimatorKind(enum.Enum):
    HUBER_RELAXED = "huber_relaxed"
    HUBER_ORIGINAL = "huber_original"
    NLS_ORIGINAL = "nls_original"
    NLS_RELAXED = "nls_relaxed"

    @property
    def is_huber(self) -> bool:
        return self in (EstimatorKind.HUBER_RELAXED, EstimatorKind.HUBER_ORIGINAL)


@dataclass(frozen=True)
class HuberParams:
    alpha: float = DEFAULT_HUBER_ALPHA
    sigma: float = 0.5

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError(f"Huber cut-off must be positive, got alpha={self.alpha}, sigma={self.sigma}")

    @property
    def cutoff(self) -> float:
        return self.alpha * self.sigma


@dataclass(frozen=True)
class EstimatorSpec:
    kind: EstimatorKind
    huber: HuberParams | None = None
    # score the range-minus-distance residual instead (the bootstrap cost)
    mirrored: bool = False

    def __post_init__(self):
        if self.kind.is_huber and self.huber is None:
            raise ValueError(f"{self.kind.value} requires HuberParams")

    @property
    def cutoff(self) -> float:
        return self.huber.cutoff if self.huber is not None else np.inf

    @classmethod
    def make(cls, kind, alpha: float = DEFAULT_HUBER_ALPHA, sigma: float = 0.5, mirrored: bool = False) -> "EstimatorSpec":
        kind = EstimatorKind(kind)
        return cls(kind, HuberParams(alpha, sigma) if kind.is_huber else None, mirrored)

    def with_kind(self, kind) -> "EstimatorSpec":
        kind = EstimatorKind(kind)
        huber = self.huber if self.huber is not None else (HuberParams() if kind.is_huber else None)
        return EstimatorSpec(kind, huber, self.mirrored)


def rho_relaxed(e, K: float):
    """One-sided Huber cost."""
    e = np.asarray(e, dtype=float)
    return np.where(e <= 0, 0.0, np.where(e < K, e * e, 2 * K * e - K * K))


def rho_original(e, K: float):
    """Symmetric Huber cost, quadratic inside ``|e| < K``."""
    a = np.abs(np.asarray(e, dtype=float))
    return np.where(a < K, a * a, 2 * K * a - K * K)


def cost_term(spec: EstimatorSpec, e):
    if spec.mirrored:
        e = -np.asarray(e, dtype=float)
    kind = spec.kind
    if kind is EstimatorKind.HUBER_RELAXED:
        return rho_relaxed(e, spec.cutoff)
    if kind is EstimatorKind.HUBER_ORIGINAL:
        return rho_original(e, spec.cutoff)
    e = np.asarray(e, dtype=float)
    if kind is EstimatorKind.NLS_ORIGINAL:
        return e * e
    return np.where(e <= 0, 0.0, e * e)


def cost_derivative(spec: EstimatorSpec, e):
    """d(cost)/de, vectorized."""
    e = np.asarray(e, dtype=float)
    if spec.mirrored:
        return -_derivative(spec, -e)
    return _derivative(spec, e)


def _derivative(spec: EstimatorSpec, e):
    kind = spec.kind
    if kind is EstimatorKind.HUBER_RELAXED:
        return 2.0 * np.clip(e, 0.0, spec.cutoff)
    if kind is EstimatorKind.HUBER_ORIGINAL:
        K = spec.cutoff
        return 2.0 * np.clip(e, -K, K)
    if kind is EstimatorKind.NLS_ORIGINAL:
        return 2.0 * e
    return 2.0 * np.maximum(e, 0.0)


def grad_term(spec: EstimatorSpec, theta_i, theta_j, r_ij: float) -> np.ndarray:
    """Gradient of one link's cost with respect to ``theta_i``.

    Zero when the two points coincide (the direction is undefined).
    """
    diff = np.asarray(theta_i, dtype=float) - np.asarray(theta_j, dtype=float)
    dist = float(np.hypot(*diff))
    if dist == 0.0:
        return np.zeros(2)
    return cost_derivative(spec, dist - r_ij) * diff / dist


def residuals(positions: np.ndarray, ranges: np.ndarray, links: np.ndarray) -> np.ndarray:
    diff = positions[links[:, 0]] - positions[links[:, 1]]
    return np.hypot(diff[:, 0], diff[:, 1]) - ranges


def _check_ranges(ranges, links) -> np.ndarray:
    ranges = np.asarray(ranges, dtype=float)
    if ranges.shape != (len(links),):
        raise ValueError(f"need one range per link ({len(links)}), got shape {ranges.shape}")
    if np.isnan(ranges).any():
        missing = links[np.flatnonzero(np.isnan(ranges))[0]]
        raise ValueError(f"missing range for link {tuple(int(v) for v in missing)}")
    return ranges


def total_cost(spec: EstimatorSpec, positions, ranges, links) -> float:
    """Sum of per-link costs, each unordered link counted once."""
    positions = np.asarray(positions, dtype=float)
    links = np.asarray(links).reshape(-1, 2)
    ranges = _check_ranges(ranges, links)
    return float(np.sum(cost_term(spec, residuals(positions, ranges, links))))


def network_gradient(spec: EstimatorSpec, positions: np.ndarray, ranges: np.ndarray, links: np.ndarray,
                     with_cost: bool = False):
    """Per-node gradient sums over neighbors.

    Returns ``(grad, n_coincident)`` where ``grad`` has the shape of
    ``positions`` and ``n_coincident`` counts links skipped because both
    endpoints sit at the same point. ``with_cost`` appends the total cost at
    ``positions`` to the tuple.
    """
    i, j = links[:, 0], links[:, 1]
    diff = positions[i] - positions[j]
    dist = np.hypot(diff[:, 0], diff[:, 1])
    e = dist - ranges
    coincident = dist == 0.0
    safe = np.where(coincident, 1.0, dist)
    w = cost_derivative(spec, e) / safe
    w[coincident] = 0.0
    g = w[:, None] * diff
    n = len(positions)
    idx = np.concatenate([i, j])
    grad = np.empty_like(positions)
    for c in (0, 1):
        grad[:, c] = np.bincount(idx, np.concatenate([g[:, c], -g[:, c]]), minlength=n)
    if with_cost:
        return grad, int(coincident.sum()), float(np.sum(cost_term(spec, e)))
    return grad, int(coincident.sum())
