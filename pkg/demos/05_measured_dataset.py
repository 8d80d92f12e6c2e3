"""
Working with measured data
==========================

Field campaigns come as two CSV tables: node positions and range samples.
Here a simulated network is written in that format, read back and localized.
Links come only from the range table, since the true radio range is unknown.
"""

import tempfile
from pathlib import Path

from huberloc import dataio, harness

cfg = dataio.paper_defaults()
net, ms = harness.make_trial(cfg, trial=3)

with tempfile.TemporaryDirectory() as tmp:
    nodes, ranges = Path(tmp) / "nodes.csv", Path(tmp) / "ranges.csv"
    dataio.export_dataset(net, ms, nodes, ranges)
    print(nodes.read_text().splitlines()[:3])
    print(ranges.read_text().splitlines()[:3])
    loaded, loaded_ms = dataio.load_dataset(nodes, ranges, comm_range=cfg.comm_range)

print(f"{loaded.n_sensors} sensors, {loaded.n_links} links, {loaded_ms.samples_per_link} samples per link")
for algo in ("stage1", "stage1_bootstrap"):
    _, res, _ = harness.run_algorithm(algo, loaded, loaded_ms, cfg, seed=1)
    print(f"{algo:18s} rmse {res.rmse:.3f} m")
