"""
Five pipelines across NLOS levels
=================================

Every trial draws a fresh network and all five pipelines run on the same
draw. This is a short run; ``huberloc compare --config paper_defaults`` does
the full one and writes CSV files.
"""

from huberloc import dataio, harness

cfg = dataio.paper_defaults().replace(n_trials=20, save_traces=False)

for ratio, result in harness.compare(cfg).items():
    print(f"\nNLOS ratio {ratio:g}")
    for algo, rep in result.summary().items():
        print(f"  {algo:18s} rmse {rep.rmse:.3f}  ger {rep.ger:.4f}  gde {rep.gde:.3f}")
    boot = result.ecdfs()[("stage1_bootstrap", ratio)]
    print(f"  P(bootstrap rmse <= 1 m) = {boot(1.0):.2f}")
