"""
Isolation forest scores
=======================

Points that are easy to isolate get short paths and scores near 1. The
decision threshold is calibrated so that a fraction tau of the training
points lies strictly above it.
"""

import numpy as np

from aeif import iforest

# The path-length normalizer c(n) and the score at E[h] = c(psi).
for n in (2, 16, 256):
    print(f"c({n}) = {iforest.c(n):.6f}   score at E[h] = c: {iforest.score_from_path(iforest.c(n), n):.3f}")

rng = np.random.default_rng(0)
cloud = rng.normal(size=(1000, 2))
model = iforest.fit(cloud, n_trees=100, psi=256, tau=0.05, seed=1)
print(f"threshold {model.score_threshold:.4f} (tau = {model.tau})")

# A point at the center, one at the edge, one far away.
for x in ([0.0, 0.0], [2.5, 0.0], [6.0, -6.0]):
    s, f, flag = iforest.decide(model, x)
    print(f"x = {x}: score {s:.3f}, f = {f:+.3f} -> {'anomaly' if flag else 'normal'}")

_, _, flags = iforest.decision_function(model, cloud)
print(f"flagged on the training cloud: {flags.mean():.3f}")
