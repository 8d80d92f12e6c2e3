"""Network topology: node positions, roles, links and neighbor sets.

Nodes are indexed from 0. Sensors occupy ``0..N-1`` and anchors
``N..N+M-1``, so the role of a node follows from its index alone.
Links are stored once per unordered pair as rows ``(i, j)`` with ``i < j``,
sorted lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# corners of the 10 x 10 m deployment, in anchor-index order
CORNER_ANCHORS = ((0.0, 0.0), (0.0, 10.0), (10.0, 10.0), (10.0, 0.0))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Network:
    """Ground-truth network.

    Attributes
    ----------
    n_sensors, n_anchors : int
    positions : (N+M, 2) array of true coordinates in meters
    comm_range : float
        Communication range R in meters.
    links : (E, 2) int array of pairs ``i < j``
    neighbors : tuple of int arrays, ``neighbors[i]`` is the set S_i
    area : (length, width) of the deployment rectangle
    labels : external node ids (datasets); defaults to ``0..N+M-1``
    """

    n_sensors: int
    n_anchors: int
    positions: np.ndarray
    comm_range: float
    links: np.ndarray
    neighbors: tuple
    area: tuple = (10.0, 10.0)
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(np.asarray(self.positions, float)))
        object.__setattr__(self, "links", _frozen(np.asarray(self.links, np.int64).reshape(-1, 2)))
        object.__setattr__(self, "neighbors", tuple(_frozen(n) for n in self.neighbors))
        if self.labels is None:
            object.__setattr__(self, "labels", _frozen(np.arange(self.n_nodes)))
        else:
            object.__setattr__(self, "labels", _frozen(np.asarray(self.labels)))

    @property
    def n_nodes(self) -> int:
        return self.n_sensors + self.n_anchors

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def sensor_ids(self) -> np.ndarray:
        return np.arange(self.n_sensors)

    @property
    def anchor_ids(self) -> np.ndarray:
        return np.arange(self.n_sensors, self.n_nodes)

    @property
    def anchor_positions(self) -> np.ndarray:
        return self.positions[self.n_sensors:]

    @property
    def diagonal(self) -> float:
        return float(np.hypot(*self.area))

    def is_anchor(self, node: int) -> bool:
        return node >= self.n_sensors

    def degree(self) -> np.ndarray:
        return np.array([len(n) for n in self.neighbors], dtype=np.int64)

    def sensor_degree_sum(self) -> int:
        """Sum of |S_i| over sensors: messages received per synchronous round."""
        return int(self.degree()[: self.n_sensors].sum())

    def isolated_sensors(self) -> np.ndarray:
        return np.flatnonzero(self.degree()[: self.n_sensors] == 0)

    def poorly_connected_sensors(self, min_neighbors: int = 3) -> np.ndarray:
        return np.flatnonzero(self.degree()[: self.n_sensors] < min_neighbors)

    def link_index(self, i: int, j: int) -> int:
        """Row of the unordered pair {i, j} in ``links``; KeyError if absent."""
        a, b = (i, j) if i < j else (j, i)
        lo = np.searchsorted(self.links[:, 0], a, side="left")
        hi = np.searchsorted(self.links[:, 0], a, side="right")
        k = lo + np.searchsorted(self.links[lo:hi, 1], b)
        if k < hi and self.links[k, 1] == b:
            return int(k)
        raise KeyError((i, j))

    def true_distances(self) -> np.ndarray:
        return link_lengths(self.positions, self.links)


def link_lengths(positions: np.ndarray, links: np.ndarray) -> np.ndarray:
    diff = positions[links[:, 0]] - positions[links[:, 1]]
    return np.hypot(diff[:, 0], diff[:, 1])


def neighbor_sets(n_nodes: int, links: np.ndarray) -> tuple:
    nbrs = [[] for _ in range(n_nodes)]
    for i, j in links:
        nbrs[i].append(j)
        nbrs[j].append(i)
    return tuple(np.array(sorted(n), dtype=np.int64) for n in nbrs)


def build_adjacency(positions, comm_range: float):
    """All pairs with true distance ``<= comm_range``.

    Returns ``(links, neighbors)``; ties at exactly R are linked.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] != 2 or len(positions) < 2:
        raise ValueError("need an (n, 2) array with n >= 2")
    i, j = np.triu_indices(len(positions), k=1)
    diff = positions[i] - positions[j]
    d = np.hypot(diff[:, 0], diff[:, 1])
    keep = d <= comm_range
    links = np.stack([i[keep], j[keep]], axis=1).astype(np.int64)
    return links, neighbor_sets(len(positions), links)


def generate_topology(
    n_sensors: int,
    anchor_positions=CORNER_ANCHORS,
    area=(10.0, 10.0),
    comm_range: float = 3.0,
    seed=None,
    sensor_positions=None,
) -> Network:
    """Place anchors at fixed positions and scatter sensors uniformly.

    ``sensor_positions`` bypasses the random draw (explicit-positions mode).
    """
    anchors = np.asarray(anchor_positions, dtype=float).reshape(-1, 2)
    if len(anchors) < 3:
        raise ValueError(f"need at least 3 anchors for 2-D localization, got {len(anchors)}")
    if comm_range <= 0:
        raise ValueError(f"comm_range must be positive, got {comm_range}")
    length, width = (float(a) for a in area)
    if length <= 0 or width <= 0:
        raise ValueError(f"area dimensions must be positive, got {area}")
    if n_sensors < 0:
        raise ValueError(f"n_sensors must be >= 0, got {n_sensors}")

    if sensor_positions is not None:
        sensors = np.asarray(sensor_positions, dtype=float).reshape(-1, 2)
        if len(sensors) != n_sensors:
            raise ValueError(f"expected {n_sensors} sensor positions, got {len(sensors)}")
    else:
        rng = np.random.default_rng(seed)
        sensors = rng.uniform((0.0, 0.0), (length, width), size=(n_sensors, 2))

    positions = np.vstack([sensors, anchors])
    links, nbrs = build_adjacency(positions, comm_range)
    return Network(
        n_sensors=n_sensors,
        n_anchors=len(anchors),
        positions=positions,
        comm_range=float(comm_range),
        links=links,
        neighbors=nbrs,
        area=(length, width),
    )


def assign_link_conditions(links, nlos_ratio: float, seed=None) -> np.ndarray:
    """Boolean NLOS mask over links; exactly ``round(ratio * |S|)`` are True.

    ``links`` is the (E, 2) link array or just the link count.
    """
    n_links = int(links) if np.ndim(links) == 0 else len(links)
    if not 0.0 <= nlos_ratio <= 1.0:
        raise ValueError(f"nlos_ratio must lie in [0, 1], got {nlos_ratio}")
    n_nlos = int(round(nlos_ratio * n_links))
    mask = np.zeros(n_links, dtype=bool)
    if n_nlos:
        rng = np.random.default_rng(seed)
        mask[rng.choice(n_links, size=n_nlos, replace=False)] = True
    return mask
