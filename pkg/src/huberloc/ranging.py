"""Synthetic ToA range measurements.

LOS links measure ``d + n`` and NLOS links ``d + n + b`` with
``n ~ N(0, sigma^2)`` and ``b ~ Exponential(mean=nlos_mu)``. Every link
carries ``samples_per_link`` independent draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeding import root_seed, stream
from .model import Network


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.5
    nlos_mu: float = 1.0
    fresh_bias_per_sample: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.nlos_mu > 0:
            raise ValueError(f"nlos_mu must be positive, got {self.nlos_mu}")


@dataclass(frozen=True)
class MeasurementSet:
    """Range samples, one row per link of ``links``.

    ``ranges[k, l]`` is the l-th sample of link ``links[k]``. ``nlos`` is
    ground truth and must not be consumed by estimators.
    """

    links: np.ndarray
    ranges: np.ndarray
    nlos: np.ndarray

    def __post_init__(self):
        for name in ("links", "ranges", "nlos"):
            a = np.array(getattr(self, name), copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.ranges.ndim != 2 or len(self.ranges) != len(self.links):
            raise ValueError("ranges must have shape (n_links, samples_per_link)")

    @property
    def samples_per_link(self) -> int:
        return self.ranges.shape[1]

    def range(self, i: int, j: int, sample: int = 0) -> float:
        """Sample ``sample`` of the link between ``i`` and ``j`` (either order)."""
        a, b = min(i, j), max(i, j)
        hit = np.flatnonzero((self.links[:, 0] == a) & (self.links[:, 1] == b))
        if not len(hit):
            raise KeyError((i, j))
        return float(self.ranges[hit[0], sample])

    def with_samples(self, n: int) -> "MeasurementSet":
        """Keep the first ``n`` samples of every link."""
        if not 1 <= n <= self.samples_per_link:
            raise ValueError(f"cannot take {n} of {self.samples_per_link} samples")
        return MeasurementSet(self.links, self.ranges[:, :n], self.nlos)


def measure(
    network: Network,
    nlos: np.ndarray,
    model: NoiseModel = NoiseModel(),
    samples_per_link: int = 10,
    seed=None,
) -> MeasurementSet:
    """Draw ``samples_per_link`` noisy ranges for every link of ``network``.

    Each link draws from its own stream keyed by ``(seed, i, j)``.
    """
    if samples_per_link < 1:
        raise ValueError(f"samples_per_link must be >= 1, got {samples_per_link}")
    nlos = np.asarray(nlos, dtype=bool)
    if nlos.shape != (network.n_links,):
        raise ValueError(f"need one condition per link ({network.n_links}), got {nlos.shape}")
    if network.n_links == 0:
        raise ValueError("network has no links to measure")

    base = root_seed(seed)
    d = network.true_distances()
    ranges = np.empty((network.n_links, samples_per_link))
    for k, (i, j) in enumerate(network.links):
        rng = stream(base, i, j)
        noise = rng.normal(0.0, model.sigma, samples_per_link)
        r = d[k] + noise
        if nlos[k]:
            n_bias = samples_per_link if model.fresh_bias_per_sample else 1
            r = r + rng.exponential(model.nlos_mu, n_bias)
        ranges[k] = r
    return MeasurementSet(network.links, ranges, nlos)


def first_sample_view(ms: MeasurementSet) -> np.ndarray:
    """Per-link first sample, the single range used by Stage I."""
    return ms.ranges[:, 0]
