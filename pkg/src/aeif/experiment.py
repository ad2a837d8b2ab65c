"""End-to-end experiment plumbing shared by the CLI, the demos and the acceptance tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from aeif import evaluation as ev
from aeif.pipeline import (
    DetectorConfig,
    DetectorKind,
    FittedDetector,
    SplitPlan,
    default_tau,
    derive_seed,
    detect,
    fit_detector,
    make_split,
)
from aeif.synth import AnomalySpec, GeneratorConfig, generate_corpus, read_manifest
from aeif.timeseries import Run, WindowBatch, WindowLabel, read_run_csv, resample_1hz, window_batch

logger = logging.getLogger(__name__)


def load_corpus(corpus_dir: str | Path) -> tuple[GeneratorConfig | None, dict[str, Run]]:
    """Read every run CSV of a corpus directory, resampled to 1 Hz.

    The generator config comes from ``manifest.json`` when present.
    """
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise FileNotFoundError(f"corpus directory {corpus_dir} does not exist")
    files = sorted(corpus_dir.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no run CSV files in {corpus_dir}")
    gen = read_manifest(corpus_dir)[0] if (corpus_dir / "manifest.json").exists() else None
    runs = {}
    for f in files:
        run = resample_1hz(read_run_csv(f))
        runs[run.id] = run
    return gen, runs


def batch_for(runs: Mapping[str, Run], ids: Iterable[str], k: int, spec: AnomalySpec | None) -> WindowBatch:
    return WindowBatch.concat([window_batch(runs[i], k, spec) for i in ids], k=k)


@dataclass
class CvResult:
    """Validation reports per fold and their mean F1 / AUC-PR per detector."""

    folds: dict[str, list[ev.EvaluationReport]] = field(default_factory=dict)

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for kind, reps in self.folds.items():
            out[kind] = {
                metric: float(np.mean([getattr(r, metric) for r in reps]))
                for metric in ("precision", "recall", "f1", "auc_pr")
            }
        return out

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "folds": {k: [r.to_dict() for r in reps] for k, reps in self.folds.items()},
        }


def cross_validate(
    kinds: Sequence[DetectorKind],
    runs: Mapping[str, Run],
    plan: SplitPlan,
    k: int,
    spec: AnomalySpec | None,
    config: DetectorConfig,
) -> CvResult:
    """Fit on each fold's training runs, evaluate on its validation runs."""
    result = CvResult()
    for i, fold in enumerate(plan.folds):
        train = batch_for(runs, fold.train_ids, k, spec)
        val = batch_for(runs, fold.val_ids, k, spec)
        fold_cfg = replace(config, seed=derive_seed(config.seed, "fold", i))
        for kind in kinds:
            det = fit_detector(kind, train, fold_cfg)
            res = detect(det, val)
            rep = ev.evaluate(kind.value, val.run_ids, res.scores, res.is_anomaly, val.labels)
            result.folds.setdefault(kind.value, []).append(rep)
        logger.info("fold %d/%d done", i + 1, len(plan.folds))
    return result


@dataclass
class ExperimentResult:
    plan: SplitPlan
    detectors: dict[DetectorKind, FittedDetector]
    reports: list[ev.EvaluationReport]
    separability: ev.SeparabilityReport | None
    test: WindowBatch

    def report(self, kind: DetectorKind | str) -> ev.EvaluationReport:
        name = kind.value if isinstance(kind, DetectorKind) else DetectorKind.parse(kind).value
        return next(r for r in self.reports if r.method == name)


def run_experiment(
    gen: GeneratorConfig,
    kinds: Sequence[DetectorKind | str] = tuple(DetectorKind),
    config: DetectorConfig | None = None,
    split_seed: int | None = None,
    runs: Sequence[Run] | None = None,
) -> ExperimentResult:
    """Generate (or take) a corpus, fit on the dev runs and evaluate on the test runs."""
    kinds = [DetectorKind.parse(k) if isinstance(k, str) else k for k in kinds]
    runs = list(runs) if runs is not None else generate_corpus(gen)
    by_id = {r.id: r for r in runs}
    plan = make_split(list(by_id), seed=gen.seed if split_seed is None else split_seed)
    if config is None:
        config = DetectorConfig(tau=default_tau(gen.anomaly.global_rate, gen.anomaly.subtle_rate))
    dev = batch_for(by_id, plan.dev_run_ids, gen.window, gen.anomaly)
    test = batch_for(by_id, plan.test_run_ids, gen.window, gen.anomaly)
    detectors = {kind: fit_detector(kind, dev, config) for kind in kinds}
    reports = ev.table1_report(detectors, test)
    sep = None
    if (test.labels == WindowLabel.SUBTLE).any() and (test.labels == WindowLabel.NORMAL).any():
        sep = ev.detector_separability(detectors, test)
    return ExperimentResult(plan, detectors, reports, sep, test)
