"""Scenario configuration, measurement-dataset CSV files and result export.

Configuration files are flat YAML mappings (``key: value`` per line). Any
key left out takes the default listed in :class:`ScenarioConfig`.

Dataset files are two CSV tables::

    nodes.csv   id,role,x,y          role is "sensor" or "anchor"
    ranges.csv  i,j,l,range_m        one row per sample l of link (i, j)
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .model import CORNER_ANCHORS, Network, neighbor_sets
from .ranging import MeasurementSet

log = logging.getLogger(__name__)

ALGORITHMS = ("stage1", "stage1_stage2", "nls_original", "nls_relaxed", "stage1_bootstrap")
ESTIMATOR_KINDS = ("huber_relaxed", "huber_original", "nls_original", "nls_relaxed")
INIT_STRATEGIES = ("uniform_random", "anchor_centroid")

NODE_HEADER = ["id", "role", "x", "y"]
RANGE_HEADER = ["i", "j", "l", "range_m"]
METRICS_HEADER = ["algorithm", "nlos_ratio", "trial", "rmse", "ger", "gde"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    area_length: float = 10.0
    area_width: float = 10.0
    n_sensors: int = 50
    anchor_positions: tuple = CORNER_ANCHORS
    comm_range: float = 3.0
    noise_sigma: float = 0.5
    nlos_bias_mean_m: float = 1.0
    fresh_bias_per_sample: bool = True
    nlos_ratio: float = 0.05
    nlos_ratios: tuple = (0.05, 0.5, 0.95)
    samples_per_link: int = 10
    n_resample: int = 1000
    huber_alpha: float = 1.345
    # noise scale assumed by the Huber cut-off; None means noise_sigma
    huber_sigma: float | None = None
    stage2_estimator: str = "huber_original"
    # bootstrap cost scores r* - d_hat rather than d_hat - r*
    stage2_mirrored: bool = False
    gamma: float = 0.04
    epsilon: float = 1e-3
    max_iterations: int = 3000
    init_strategy: str = "anchor_centroid"
    gamma_halvings: int = 4
    n_trials: int = 100
    master_seed: int = 0
    algorithms: tuple = ALGORITHMS
    fixed_topology: bool = False
    min_sensor_degree: int = 1
    include_anchors: bool = False
    max_divergence_fraction: float = 0.05
    save_traces: bool = True

    def __post_init__(self):
        self.validate()

    @property
    def area(self) -> tuple:
        return (self.area_length, self.area_width)

    @property
    def cutoff_sigma(self) -> float:
        return self.noise_sigma if self.huber_sigma is None else self.huber_sigma

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        def positive(key):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v) and v > 0):
                raise ConfigError(key, f"must be a positive number, got {v!r}")

        def ratio(key, v):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise ConfigError(key, f"must lie in [0, 1], got {v!r}")

        def count(key, minimum):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
                raise ConfigError(key, f"must be an integer >= {minimum}, got {v!r}")

        for key in ("area_length", "area_width", "comm_range", "noise_sigma", "nlos_bias_mean_m",
                    "huber_alpha", "gamma", "epsilon"):
            positive(key)
        if self.huber_sigma is not None:
            positive("huber_sigma")
        ratio("nlos_ratio", self.nlos_ratio)
        if len(self.nlos_ratios) == 0:
            raise ConfigError("nlos_ratios", "needs at least one ratio")
        for r in self.nlos_ratios:
            ratio("nlos_ratios", r)
        count("n_sensors", 0)
        count("samples_per_link", 1)
        count("n_resample", 1)
        count("max_iterations", 1)
        count("gamma_halvings", 0)
        count("n_trials", 1)
        count("master_seed", 0)
        count("min_sensor_degree", 0)
        ratio("max_divergence_fraction", self.max_divergence_fraction)
        anchors = np.asarray(self.anchor_positions, dtype=float)
        if anchors.ndim != 2 or anchors.shape[1] != 2:
            raise ConfigError("anchor_positions", "must be a list of [x, y] pairs")
        if len(anchors) < 3:
            raise ConfigError("anchor_positions", f"need at least 3 anchors, got {len(anchors)}")
        if self.stage2_estimator not in ESTIMATOR_KINDS:
            raise ConfigError("stage2_estimator", f"must be one of {ESTIMATOR_KINDS}")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ConfigError("init_strategy", f"must be one of {INIT_STRATEGIES}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError("algorithms", f"unknown or empty algorithm list {list(self.algorithms)}")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "anchor_positions":
                v = [[float(x), float(y)] for x, y in v]
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        kw = {}
        for key, v in data.items():
            if key == "anchor_positions":
                try:
                    v = tuple((float(p[0]), float(p[1])) for p in v)
                except (TypeError, ValueError, IndexError):
                    raise ConfigError(key, "must be a list of [x, y] pairs") from None
            elif key in ("nlos_ratios", "algorithms"):
                if not isinstance(v, (list, tuple)):
                    v = [v]
                v = tuple(v)
            elif key in ("area_length", "area_width", "comm_range", "noise_sigma", "nlos_bias_mean_m",
                         "huber_alpha", "gamma", "epsilon", "nlos_ratio", "max_divergence_fraction",
                         "huber_sigma") and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            kw[key] = v
        return cls(**kw)


PAPER_DEFAULTS_PATH = Path(__file__).with_name("configs") / "paper_defaults.yaml"


def load_config(path) -> ScenarioConfig:
    """Read and validate a flat YAML scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    with open(path) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a key: value mapping")
    return ScenarioConfig.from_dict(data)


def save_config(config: ScenarioConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False, default_flow_style=None)


def paper_defaults() -> ScenarioConfig:
    return load_config(PAPER_DEFAULTS_PATH)


# -- datasets -----------------------------------------------------------------

def _read_csv(path, header):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            got = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if [h.strip() for h in got] != header:
            raise DatasetError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
        return [row for row in reader if row]


def load_dataset(node_path, range_path, comm_range: float = 3.0):
    """Build a network and measurement set from the two dataset CSV files.

    A link exists iff the range table mentions the pair. Entries given in
    both orientations are averaged sample by sample.
    """
    nodes = _read_csv(node_path, NODE_HEADER)
    sensors, anchors = [], []
    seen = set()
    for row in nodes:
        nid, role, x, y = row[0].strip(), row[1].strip().lower(), float(row[2]), float(row[3])
        if nid in seen:
            raise DatasetError(f"{node_path}: duplicate node id {nid}")
        seen.add(nid)
        if role == "sensor":
            sensors.append((nid, x, y))
        elif role == "anchor":
            anchors.append((nid, x, y))
        else:
            raise DatasetError(f"{node_path}: node {nid} has unknown role {role!r}")
    if len(anchors) < 3:
        raise DatasetError(f"{node_path}: need at least 3 anchors, got {len(anchors)}")
    ordered = sensors + anchors
    index = {nid: k for k, (nid, _, _) in enumerate(ordered)}
    positions = np.array([(x, y) for _, x, y in ordered], dtype=float)
    if (positions < 0).any():
        raise DatasetError(f"{node_path}: coordinates must be non-negative")

    samples = defaultdict(lambda: defaultdict(list))
    for row in _read_csv(range_path, RANGE_HEADER):
        a, b, l, r = row[0].strip(), row[1].strip(), int(row[2]), float(row[3])
        for nid in (a, b):
            if nid not in index:
                raise DatasetError(f"{range_path}: range references unknown node id {nid}")
        i, j = index[a], index[b]
        if i == j:
            raise DatasetError(f"{range_path}: self-range for node {a}")
        samples[(min(i, j), max(i, j))][l].append(r)

    if not samples:
        raise DatasetError(f"{range_path}: no range entries")
    links = np.array(sorted(samples), dtype=np.int64)
    n_samples = {len(samples[tuple(k)]) for k in links}
    if len(n_samples) != 1:
        raise DatasetError(f"{range_path}: every link needs the same number of samples, found {sorted(n_samples)}")
    ranges = np.empty((len(links), n_samples.pop()))
    for k, key in enumerate(map(tuple, links)):
        per_l = samples[key]
        for col, l in enumerate(sorted(per_l)):
            vals = per_l[l]
            if len(vals) > 1 and (max(vals) - min(vals)) > 0.1 * abs(np.mean(vals)):
                log.warning("link %s-%s sample %d: asymmetric ranges %s", ordered[key[0]][0],
                            ordered[key[1]][0], l, vals)
            ranges[k, col] = np.mean(vals)

    network = Network(
        n_sensors=len(sensors),
        n_anchors=len(anchors),
        positions=positions,
        comm_range=float(comm_range),
        links=links,
        neighbors=neighbor_sets(len(ordered), links),
        area=(max(float(positions[:, 0].max()), 1e-9), max(float(positions[:, 1].max()), 1e-9)),
        labels=np.array([nid for nid, _, _ in ordered], dtype=object),
    )
    ms = MeasurementSet(links, ranges, np.zeros(len(links), dtype=bool))
    return network, ms


def export_dataset(network: Network, ms: MeasurementSet, node_path, range_path) -> None:
    """Write the dataset tables, one range row per unordered pair and sample."""
    with open(node_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(NODE_HEADER)
        for k in range(network.n_nodes):
            role = "anchor" if network.is_anchor(k) else "sensor"
            x, y = network.positions[k]
            w.writerow([network.labels[k], role, repr(float(x)), repr(float(y))])
    with open(range_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RANGE_HEADER)
        for (i, j), row in zip(ms.links, ms.ranges):
            for l, r in enumerate(row, start=1):
                w.writerow([network.labels[i], network.labels[j], l, repr(float(r))])


# -- results ------------------------------------------------------------------

def _fmt_ratio(r: float) -> str:
    return f"{float(r):g}"


def _num(v: float) -> str:
    return repr(float(v))


def _ratio_key(ratio) -> float:
    # measured datasets carry no NLOS ratio (nan), which breaks plain sorting
    return -np.inf if np.isnan(ratio) else float(ratio)


def export_results(rows, ecdfs: dict, traces: dict, out_dir) -> list:
    """Write ``metrics.csv``, ``ecdf_<algo>_<ratio>.csv`` and ``trace_<algo>_<ratio>_<trial>.csv``.

    ``rows`` are trial results (attributes named as in ``METRICS_HEADER``),
    ``ecdfs`` maps ``(algorithm, ratio)`` to an ECDF table and ``traces`` maps
    ``(algorithm, ratio, trial)`` to a solver trace. Returns the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")

    written = []
    path = out / "metrics.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in sorted(rows, key=lambda r: (_ratio_key(r.nlos_ratio), r.algorithm, r.trial)):
            w.writerow([r.algorithm, _fmt_ratio(r.nlos_ratio), r.trial, _num(r.rmse), _num(r.ger), _num(r.gde)])
    written.append(path)

    for (algo, ratio), table in sorted(ecdfs.items(), key=lambda kv: (kv[0][0], _ratio_key(kv[0][1]))):
        path = out / f"ecdf_{algo}_{_fmt_ratio(ratio)}.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["rmse", "probability"])
            for v, p in table.rows():
                w.writerow([_num(v), _num(p)])
        written.append(path)

    for (algo, ratio, trial), trace in sorted(traces.items(), key=lambda kv: (kv[0][0], _ratio_key(kv[0][1]), kv[0][2])):
        path = out / f"trace_{algo}_{_fmt_ratio(ratio)}_{trial}.csv"
        trace.to_csv(path)
        written.append(path)
    return written
