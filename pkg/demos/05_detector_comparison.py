"""
Comparing the three detectors
=============================

IF on raw windows, PCA-IF and AE-IF share the same standardization and
threshold rule; only the feature space differs. This runs a reduced corpus
so it finishes in seconds. ``aeif generate && aeif train && aeif evaluate``
runs the full default experiment.
"""

from aeif import GeneratorConfig, run_experiment

gen = GeneratorConfig(n_runs=10, run_length_s=20_000, seed=0)
result = run_experiment(gen)

print(f"dev runs {result.plan.dev_run_ids}")
print(f"test runs {result.plan.test_run_ids}")
print(f"{'method':8s} {'precision':>9s} {'recall':>7s} {'f1':>6s} {'auc_pr':>7s} {'subtle':>7s}")
for r in result.reports:
    print(f"{r.method:8s} {r.precision:9.3f} {r.recall:7.3f} {r.f1:6.3f} {r.auc_pr:7.3f} {r.subtle_recall:7.3f}")

# Median distance of subtle windows from the normal cloud, in normal-std units.
for space, med in result.separability.medians.items():
    print(f"separability {space:7s} {med:.3g}")
