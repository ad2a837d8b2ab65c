"""
PCA view of the windows
=======================

Most of the variance of standardized windows is the overall level. The
leading two components capture level and slope, which is why an
oscillating window is only partly visible in this view.
"""

import numpy as np

from aeif import WindowLabel, fit_standardizer, generate_corpus, window_batch
from aeif.pca import fit_pca, transform_pca
from aeif.synth import GeneratorConfig

cfg = GeneratorConfig(n_runs=2, run_length_s=20_000, seed=5)
batch = window_batch(generate_corpus(cfg)[0], cfg.window, cfg.anomaly)
z = fit_standardizer(batch).transform(batch.values)

pca = fit_pca(z, n_components=2)
share = pca.explained_variance / np.trace(np.cov(z.T, bias=True))
print("explained variance share:", np.round(share, 4))
print("components:\n", np.round(pca.components, 3))

y = transform_pca(pca, z)
for label in WindowLabel:
    sel = y[batch.labels == label]
    if sel.size:
        print(f"{label.name:7s} mean {np.round(sel.mean(axis=0), 3)} std {np.round(sel.std(axis=0), 3)}")

print("components for 99% of the variance:", fit_pca(z, variance_coverage=0.99).n_components)
