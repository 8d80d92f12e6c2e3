"""Bootstrap range refinement.

After a first solve, each link's L range samples are turned into residuals
against the estimated distance. Resampling those residuals with replacement
and averaging gives a correction ``e*`` per link, and the refined range
``r* = d_hat + e*`` feeds a second solve started from the first estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solver as _solver
from ._seeding import root_seed, stream
from .estimators import EstimatorSpec
from .model import Network, link_lengths
from .ranging import MeasurementSet


@dataclass(frozen=True)
class BootstrapConfig:
    samples_per_link: int = 10
    n_resample: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_link < 1:
            raise ValueError(f"samples_per_link must be >= 1, got {self.samples_per_link}")
        if self.n_resample < 1:
            raise ValueError(f"n_resample must be >= 1, got {self.n_resample}")


def residuals(estimates, ms: MeasurementSet) -> np.ndarray:
    """``(E, L)`` array of ``r_ij^l - ||theta_i - theta_j||``."""
    d_hat = link_lengths(np.asarray(estimates, dtype=float), ms.links)
    return ms.ranges - d_hat[:, None]


def resample_mean(values, n_resample: int, seed=None) -> float:
    """Mean of ``n_resample`` draws with replacement from ``values``."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("cannot resample an empty residual list")
    if n_resample < 1:
        raise ValueError(f"n_resample must be >= 1, got {n_resample}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return float(values[rng.integers(0, values.size, n_resample)].mean())


def bootstrap_errors(rs: np.ndarray, links: np.ndarray, cfg: BootstrapConfig) -> np.ndarray:
    """One resampled mean ``e*`` per link, each from its own ``(seed, i, j)`` stream."""
    base = root_seed(cfg.seed)
    return np.array([
        resample_mean(rs[k], cfg.n_resample, stream(base, i, j))
        for k, (i, j) in enumerate(links)
    ])


def refine_ranges(estimates, rs: np.ndarray, cfg: BootstrapConfig, links: np.ndarray) -> np.ndarray:
    """``r* = ||theta_i - theta_j|| + e*`` for every link in ``links``."""
    rs = np.asarray(rs, dtype=float)
    if rs.shape[0] != len(links):
        raise ValueError(f"residuals cover {rs.shape[0]} links, network has {len(links)}")
    d_hat = link_lengths(np.asarray(estimates, dtype=float), links)
    return d_hat + bootstrap_errors(rs, links, cfg)


def run_stage2(
    network: Network,
    ms: MeasurementSet,
    stage1_estimates,
    spec: EstimatorSpec,
    solver_cfg: _solver.SolverConfig = _solver.SolverConfig(),
    cfg: BootstrapConfig = BootstrapConfig(),
):
    """Refine ranges by bootstrap and solve again from the Stage I estimate.

    The returned trace counts the rerun's rounds plus one range exchange per
    sample per neighbor (``samples_per_link * sum_i |S_i|`` messages).
    """
    if ms.samples_per_link > cfg.samples_per_link:
        ms = ms.with_samples(cfg.samples_per_link)
    rs = residuals(stage1_estimates, ms)
    r_star = refine_ranges(stage1_estimates, rs, cfg, network.links)
    estimates, trace = _solver.run(network, r_star, spec, solver_cfg, initial=stage1_estimates)
    exchange = ms.samples_per_link * network.sensor_degree_sum()
    trace.messages_sent += exchange
    return estimates, trace
