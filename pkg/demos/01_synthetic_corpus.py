"""
Synthetic sensor runs
=====================

A run is a 1 Hz signal that wanders inside an operating band. Global
anomalies leave the band; subtle ones stay inside it but oscillate faster
than normal operation allows.
"""

import numpy as np

from aeif import GeneratorConfig, WindowLabel, generate_run, window_batch

# A two-hour run with the default band (80..120) and 5% of each anomaly type.
cfg = GeneratorConfig(n_runs=1, run_length_s=7200, seed=3)
run, events = generate_run(cfg, 0)
print(f"{run.id}: {len(run)} samples, min {run.values.min():.1f}, max {run.values.max():.1f}")

# Windows are labeled by rule, not by which injector touched them.
batch = window_batch(run, cfg.window, cfg.anomaly)
counts = np.bincount(batch.labels, minlength=3)
for label in WindowLabel:
    print(f"  {label.name:7s} {counts[label]:5d} windows ({counts[label] / len(batch):.1%})")

# The inventory lists each injected event.
for e in events[:8]:
    print("  event", e)

# One window of each kind.
for label in WindowLabel:
    idx = np.flatnonzero(batch.labels == label)
    if idx.size:
        w = batch.values[idx[0]]
        print(f"{label.name:7s} window at t={batch.start_index[idx[0]]}: {np.round(w, 1)} range {np.ptp(w):.2f}")
