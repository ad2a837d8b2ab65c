"""
Autoencoder and mean cubic error
================================

The autoencoder learns normal windows only. Its signed mean cubic error
(MCE) stays near zero for normal windows and swings away from zero for
windows whose shape it has never seen.
"""

import numpy as np

from aeif import TrainConfig, WindowLabel, fit_standardizer, generate_corpus, window_batch
from aeif import autoencoder as ae
from aeif.synth import GeneratorConfig

cfg = GeneratorConfig(n_runs=3, run_length_s=20_000, seed=7)
batches = [window_batch(r, cfg.window, cfg.anomaly) for r in generate_corpus(cfg)]
train, test = batches[0], batches[1]

std = fit_standardizer(train)
normal = train.labels == WindowLabel.NORMAL
model, hist = ae.train(TrainConfig(epochs=60, seed=0), std.transform(train.values[normal]), standardizer=std)
print(f"trained on {normal.sum()} normal windows: loss {hist.epoch_loss[0]:.4f} -> {min(hist.epoch_loss):.6f} "
      f"(best epoch {hist.best_epoch})")

m = ae.mce_features(model, std.transform(test.values))
for label in WindowLabel:
    sel = m[test.labels == label]
    if sel.size:
        lo, med, hi = np.percentile(np.abs(sel), [10, 50, 90])
        print(f"{label.name:7s} |MCE| 10/50/90%: {lo:.2e} {med:.2e} {hi:.2e}")

# The cube keeps the sign of each residual.
print("mce([1, -1, 2], 0) =", ae.mce(np.array([1.0, -1.0, 2.0]), np.zeros(3)))
print("absolute variant    =", ae.mce(np.array([1.0, -1.0, 2.0]), np.zeros(3), absolute=True))
