"""
Robust costs for biased ranges
==============================

A positive NLOS bias makes a measured range too long, so the residual
``e = estimated distance - measured range`` turns negative. The relaxed costs
ignore that side entirely.
"""

import numpy as np

from huberloc.estimators import EstimatorSpec, cost_term, cost_derivative

K = 1.0
e = np.linspace(-3, 3, 13)
kinds = ["huber_relaxed", "huber_original", "nls_original", "nls_relaxed"]

print(f"{'e':>6}" + "".join(f"{k:>16}" for k in kinds))
for x in e:
    row = [float(cost_term(EstimatorSpec.make(k, alpha=K, sigma=1.0), x)) for k in kinds]
    print(f"{x:6.1f}" + "".join(f"{v:16.3f}" for v in row))

# past the cut-off the Huber slope is capped at 2K, so one wild range can only
# pull so hard on a node
spec = EstimatorSpec.make("huber_relaxed", alpha=K, sigma=1.0)
print("\nrelaxed Huber slope at e = 0.5, 1, 5:", cost_derivative(spec, np.array([0.5, 1.0, 5.0])))
