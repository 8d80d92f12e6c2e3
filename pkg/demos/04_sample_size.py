"""
How many samples per link?
==========================

Each trial draws twenty samples per link once and the bootstrap pass uses
the first 3, 5, 10 or 20 of them, so sizes are compared on identical
networks.
"""

from huberloc import dataio, harness

cfg = dataio.paper_defaults().replace(n_trials=20)
sweep = harness.sample_size_sweep(cfg, [3, 5, 10, 20])

for size in sweep.sizes:
    table = sweep.ecdfs()[size]
    print(f"L={size:2d}  mean rmse {sweep.mean_rmse(size):.3f}  median trial rmse {table.values[len(table) // 2]:.3f}")
