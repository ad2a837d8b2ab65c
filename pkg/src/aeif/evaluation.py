"""Detection metrics, per-run report averaging and feature-space separability."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from aeif.timeseries import WindowBatch, WindowLabel


def confusion(predictions, labels) -> tuple[int, int, int, int]:
    """``(tp, fp, fn, tn)`` with anomaly as the positive class.

    Any non-zero value counts as anomalous, so window label codes can be
    passed directly.
    """
    pred = np.asarray(predictions) != 0
    true = np.asarray(labels) != 0
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {true.size} labels")
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    tn = int(np.sum(~pred & ~true))
    return tp, fp, fn, tn


def prf1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall and F1; any 0/0 ratio is reported as 0."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, f1_from_pr(p, r)


def f1_from_pr(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def _ranked_groups(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (positives, total) at the end of each descending tie group."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) != 0
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    return tp, ends + 1


def auc_pr(scores, labels) -> float:
    """Average precision with tied scores entering the ranking together."""
    tp, seen = _ranked_groups(scores, labels)
    n_pos = int(tp[-1]) if tp.size else 0
    if n_pos == 0:
        raise ValueError("AUC-PR undefined: no positive labels")
    precision = tp / seen
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(precision * recall_gain))


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Precision, recall and the score threshold at each tie-group cut."""
    s = np.asarray(scores, dtype=np.float64)
    tp, seen = _ranked_groups(s, labels)
    n_pos = tp[-1] if tp.size else 0
    if n_pos == 0:
        raise ValueError("PR curve undefined: no positive labels")
    thresholds = np.sort(s)[::-1][seen - 1]
    return tp / seen, tp / n_pos, thresholds


@dataclass
class RunMetrics:
    run_id: str
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    subtle_recall: float | None = None


@dataclass
class EvaluationReport:
    method: str
    per_run: list[RunMetrics]
    precision: float
    recall: float
    f1: float
    auc_pr: float
    subtle_recall: float | None = None
    global_recall: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def run_metrics(run_id: str, predictions, labels) -> RunMetrics:
    labels = np.asarray(labels)
    pred = np.asarray(predictions) != 0
    tp, fp, fn, tn = confusion(pred, labels)
    p, r, f = prf1(tp, fp, fn)
    subtle = labels == WindowLabel.SUBTLE
    sr = float(pred[subtle].mean()) if subtle.any() else None
    return RunMetrics(run_id, tp, fp, fn, tn, p, r, f, sr)


def evaluate(method: str, run_ids, scores, predictions, labels) -> EvaluationReport:
    """Per-run metrics averaged over runs; AUC-PR on pooled window scores.

    ``run_ids``, ``scores``, ``predictions`` and ``labels`` are aligned per
    window. Averages use the per-run values, never pooled counts.
    """
    run_ids = np.asarray(run_ids)
    scores = np.asarray(scores, dtype=np.float64)
    pred = np.asarray(predictions) != 0
    labels = np.asarray(labels)
    per_run = []
    for rid in dict.fromkeys(run_ids.tolist()):
        sel = run_ids == rid
        per_run.append(run_metrics(str(rid), pred[sel], labels[sel]))
    if not per_run:
        raise ValueError("nothing to evaluate")
    subtle = labels == WindowLabel.SUBTLE
    glob = labels == WindowLabel.GLOBAL
    return EvaluationReport(
        method=method,
        per_run=per_run,
        precision=float(np.mean([m.precision for m in per_run])),
        recall=float(np.mean([m.recall for m in per_run])),
        f1=float(np.mean([m.f1 for m in per_run])),
        auc_pr=auc_pr(scores, labels),
        subtle_recall=float(pred[subtle].mean()) if subtle.any() else None,
        global_recall=float(pred[glob].mean()) if glob.any() else None,
    )


def reports_to_csv(reports: Sequence[EvaluationReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "run_id", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "subtle_recall"])
    for rep in reports:
        for m in rep.per_run:
            writer.writerow([rep.method, m.run_id, m.tp, m.fp, m.fn, m.tn,
                             repr(m.precision), repr(m.recall), repr(m.f1),
                             "" if m.subtle_recall is None else repr(m.subtle_recall)])
    return buf.getvalue()


def pr_curve_csv(scores, labels) -> str:
    precision, recall, thresholds = pr_curve(scores, labels)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "precision", "recall"])
    for t, p, r in zip(thresholds, precision, recall):
        writer.writerow([repr(float(t)), repr(float(p)), repr(float(r))])
    return buf.getvalue()


@dataclass
class SeparabilityReport:
    distances: dict[str, list[float]] = field(default_factory=dict)
    medians: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["space", "index", "distance"])
        for space, dist in self.distances.items():
            for i, d in enumerate(dist):
                writer.writerow([space, i, repr(d)])
        return buf.getvalue()

    def medians_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["space", "median_distance"])
        for space, med in self.medians.items():
            writer.writerow([space, repr(med)])
        return buf.getvalue()


def relative_distances(features: np.ndarray, labels) -> np.ndarray:
    """Distances of subtle-anomaly rows from the normal mean, in normal-std units.

    The per-dimension z-scores are combined as ``||z|| / sqrt(dim)``.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    labels = np.asarray(labels)
    normal = f[labels == WindowLabel.NORMAL]
    subtle = f[labels == WindowLabel.SUBTLE]
    if subtle.shape[0] == 0:
        raise ValueError("no subtle anomalies to measure")
    if normal.shape[0] == 0:
        raise ValueError("no normal windows to define the reference mean")
    mu = normal.mean(axis=0)
    sd = normal.std(axis=0)
    sd = np.where(sd > 1e-12, sd, 1e-12)
    z = (subtle - mu) / sd
    return np.linalg.norm(z, axis=1) / math.sqrt(f.shape[1])


def separability(feature_sets: Mapping[str, np.ndarray], labels) -> SeparabilityReport:
    report = SeparabilityReport()
    for space, feats in feature_sets.items():
        d = relative_distances(feats, labels)
        report.distances[space] = d.tolist()
        report.medians[space] = float(np.median(d))
    return report


SPACE_OF_KIND = {"IF_RAW": "raw", "PCA_IF": "pca", "AE_IF": "mce_ae"}


def table1_report(detectors: Mapping, test: WindowBatch) -> list[EvaluationReport]:
    """Evaluate each fitted detector on the labeled test windows."""
    from aeif.pipeline import detect

    if test.labels is None:
        raise ValueError("test windows must be labeled")
    reports = []
    for kind, det in detectors.items():
        res = detect(det, test)
        name = getattr(kind, "value", str(kind))
        reports.append(evaluate(name, test.run_ids, res.scores, res.is_anomaly, test.labels))
    return reports


def detector_separability(detectors: Mapping, test: WindowBatch) -> SeparabilityReport:
    """Separability of subtle anomalies in each detector's feature space."""
    from aeif.pipeline import feature_map

    spaces = {}
    for kind, det in detectors.items():
        name = getattr(kind, "value", str(kind))
        spaces[SPACE_OF_KIND.get(name, name)] = feature_map(det, test)
    return separability(spaces, test.labels)
