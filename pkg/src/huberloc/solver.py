"""Synchronous distributed gradient descent over the sensor network.

Each round every sensor receives its neighbors' current estimates, takes one
gradient step on its own share of the cost and reports how far it moved.
All sensors read round-``n`` positions and write round-``n+1`` positions, so
the result does not depend on the order in which nodes are visited.
Anchors never move.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import EstimatorSpec, network_gradient, residuals, cost_term
from .model import Network


class InitStrategy(enum.Enum):
    UNIFORM_RANDOM = "uniform_random"
    ANCHOR_CENTROID = "anchor_centroid"
    GIVEN = "given"


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 0.01
    epsilon: float = 1e-3
    max_iterations: int = 1000
    init_strategy: InitStrategy = InitStrategy.UNIFORM_RANDOM
    # abort when any coordinate leaves this many area diagonals
    divergence_factor: float = 100.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        object.__setattr__(self, "init_strategy", InitStrategy(self.init_strategy))


class SolverDiverged(RuntimeError):
    def __init__(self, iteration: int, gamma: float):
        super().__init__(f"gradient descent diverged at iteration {iteration} with gamma={gamma:g}")
        self.iteration = iteration
        self.gamma = gamma


@dataclass(frozen=True)
class SolverState:
    estimates: np.ndarray
    iteration: int = 0
    last_max_delta: float = np.inf
    coincident_links: int = 0
    # total cost at the iterate the last step started from
    previous_cost: float = np.nan


@dataclass
class SolverTrace:
    max_deltas: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    messages_sent: int = 0
    gradient_evals: int = 0
    converged: bool = False
    iterations_used: int = 0
    coincident_links: int = 0

    def extend(self, other: "SolverTrace") -> "SolverTrace":
        """Concatenate two consecutive runs (counters add up)."""
        return SolverTrace(
            max_deltas=self.max_deltas + other.max_deltas,
            costs=self.costs + other.costs,
            messages_sent=self.messages_sent + other.messages_sent,
            gradient_evals=self.gradient_evals + other.gradient_evals,
            converged=other.converged,
            iterations_used=self.iterations_used + other.iterations_used,
            coincident_links=self.coincident_links + other.coincident_links,
        )

    def rows(self):
        """(iteration, max_delta, cost, cumulative messages) per executed round."""
        per_round = self.messages_sent / self.iterations_used if self.iterations_used else 0
        for n, (delta, cost) in enumerate(zip(self.max_deltas, self.costs), start=1):
            yield n, delta, cost, int(round(n * per_round))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["iteration", "max_delta", "cost", "messages"])
            for n, delta, cost, msgs in self.rows():
                w.writerow([n, repr(float(delta)), repr(float(cost)), msgs])


def init_positions(network: Network, strategy=InitStrategy.UNIFORM_RANDOM, seed=None, given=None) -> np.ndarray:
    """Initial estimates with anchors pinned to their true positions."""
    strategy = InitStrategy(strategy)
    est = np.array(network.positions, dtype=float)
    n = network.n_sensors
    if strategy is InitStrategy.UNIFORM_RANDOM:
        rng = np.random.default_rng(seed)
        est[:n] = rng.uniform((0.0, 0.0), network.area, size=(n, 2))
    elif strategy is InitStrategy.ANCHOR_CENTROID:
        est[:n] = network.anchor_positions.mean(axis=0)
    else:
        if given is None:
            raise ValueError("GIVEN initialization needs explicit positions")
        given = np.asarray(given, dtype=float)
        if given.shape[0] < n or given.ndim != 2:
            raise ValueError(f"given positions cover {given.shape[0]} nodes, need at least {n} sensors")
        est[:n] = given[:n]
    return est


def step(state: SolverState, network: Network, ranges, spec: EstimatorSpec, config: SolverConfig) -> SolverState:
    """One synchronous round of Jacobi-style gradient descent."""
    theta = state.estimates
    grad, coincident, cost = network_gradient(spec, theta, np.asarray(ranges, float), network.links, with_cost=True)
    n = network.n_sensors
    new = theta.copy()
    new[:n] -= config.gamma * grad[:n]
    moved = new[:n] - theta[:n]
    max_delta = float(np.hypot(moved[:, 0], moved[:, 1]).max()) if n else 0.0
    return SolverState(new, state.iteration + 1, max_delta, state.coincident_links + coincident, cost)


def run(
    network: Network,
    ranges,
    spec: EstimatorSpec,
    config: SolverConfig = SolverConfig(),
    seed=None,
    initial=None,
):
    """Iterate :func:`step` until the largest move is ``<= epsilon``.

    Returns ``(estimates, trace)``. Raises :class:`SolverDiverged` if any
    coordinate runs off beyond ``divergence_factor`` area diagonals.
    """
    ranges = np.asarray(ranges, dtype=float)
    if ranges.shape != (network.n_links,):
        raise ValueError(f"need one range per link ({network.n_links}), got {ranges.shape}")
    if initial is not None:
        theta0 = init_positions(network, InitStrategy.GIVEN, given=initial)
    else:
        theta0 = init_positions(network, config.init_strategy, seed)

    bound = config.divergence_factor * network.diagonal
    per_round = network.sensor_degree_sum()
    trace = SolverTrace()
    state = SolverState(theta0)
    while state.iteration < config.max_iterations:
        state = step(state, network, ranges, spec, config)
        if not np.all(np.abs(state.estimates) <= bound):
            raise SolverDiverged(state.iteration, config.gamma)
        trace.max_deltas.append(state.last_max_delta)
        # each step reports the cost it started from; shift to post-step costs below
        trace.costs.append(state.previous_cost)
        if state.last_max_delta <= config.epsilon:
            trace.converged = True
            break
    final_cost = float(np.sum(cost_term(spec, residuals(state.estimates, ranges, network.links))))
    trace.costs = trace.costs[1:] + [final_cost]

    trace.iterations_used = state.iteration
    trace.messages_sent = state.iteration * per_round
    trace.gradient_evals = state.iteration * per_round
    trace.coincident_links = state.coincident_links
    return state.estimates, trace


def with_gamma(config: SolverConfig, gamma: float) -> SolverConfig:
    return replace(config, gamma=gamma)
