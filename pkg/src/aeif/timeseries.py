"""Run ingestion, 1 Hz resampling, non-overlapping windowing and standardization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from aeif.synth import AnomalySpec

# Floor applied to zero-variance dimensions so the transform stays total.
STD_FLOOR = 1e-12


class WindowLabel(IntEnum):
    NORMAL = 0
    GLOBAL = 1
    SUBTLE = 2


@dataclass(frozen=True)
class Run:
    """A univariate acquisition with optional per-sample labels (0 normal, 1 anomalous)."""

    id: str
    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.ndim != 1 or vals.ndim != 1:
            raise ValueError("timestamps and values must be 1-D")
        if ts.shape != vals.shape:
            raise ValueError(
                f"timestamps and values differ in length ({ts.size} vs {vals.size})"
            )
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int8)
            if lab.shape != vals.shape:
                raise ValueError("labels must have the same length as values")
            if np.any((lab != 0) & (lab != 1)):
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Window:
    values: np.ndarray
    run_id: str
    start_index: int
    label: WindowLabel | None = None


@dataclass(frozen=True)
class WindowBatch:
    """Array form of the windows of one or more runs.

    ``values`` has shape ``(n, k)``; ``run_ids`` and ``start_index`` are
    per-row. ``labels`` holds :class:`WindowLabel` codes, or is ``None`` for
    unlabeled data.
    """

    values: np.ndarray
    run_ids: np.ndarray
    start_index: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def k(self) -> int:
        return int(self.values.shape[1])

    @property
    def is_anomalous(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("batch carries no labels")
        return self.labels != WindowLabel.NORMAL

    def select(self, mask: np.ndarray) -> WindowBatch:
        return WindowBatch(
            values=self.values[mask],
            run_ids=self.run_ids[mask],
            start_index=self.start_index[mask],
            labels=None if self.labels is None else self.labels[mask],
        )

    def windows(self) -> list[Window]:
        return [
            Window(
                values=self.values[i].copy(),
                run_id=str(self.run_ids[i]),
                start_index=int(self.start_index[i]),
                label=None if self.labels is None else WindowLabel(int(self.labels[i])),
            )
            for i in range(len(self))
        ]

    @classmethod
    def concat(cls, batches: Sequence[WindowBatch], k: int | None = None) -> WindowBatch:
        if not batches:
            if k is None:
                raise ValueError("cannot infer window length of an empty batch list")
            return cls(
                values=np.empty((0, k)),
                run_ids=np.empty(0, dtype=object),
                start_index=np.empty(0, dtype=np.int64),
                labels=np.empty(0, dtype=np.int8),
            )
        labeled = all(b.labels is not None for b in batches)
        return cls(
            values=np.concatenate([b.values for b in batches]),
            run_ids=np.concatenate([b.run_ids for b in batches]),
            start_index=np.concatenate([b.start_index for b in batches]),
            labels=np.concatenate([b.labels for b in batches]) if labeled else None,
        )

    @classmethod
    def from_windows(cls, windows: Sequence[Window]) -> WindowBatch:
        if not windows:
            raise ValueError("empty window list")
        labeled = all(w.label is not None for w in windows)
        return cls(
            values=np.stack([np.asarray(w.values, dtype=np.float64) for w in windows]),
            run_ids=np.array([w.run_id for w in windows], dtype=object),
            start_index=np.array([w.start_index for w in windows], dtype=np.int64),
            labels=np.array([int(w.label) for w in windows], dtype=np.int8) if labeled else None,
        )


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.means.size)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected windows of length {self.dim}, got {x.shape[-1]}")
        return (x - self.means) / self.stds

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.dim:
            raise ValueError(f"expected windows of length {self.dim}, got {z.shape[-1]}")
        return z * self.stds + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Standardizer:
        return cls(
            means=np.asarray(d["means"], dtype=np.float64),
            stds=np.asarray(d["stds"], dtype=np.float64),
        )


def resample_1hz(run: Run) -> Run:
    """Average samples into whole-second buckets and forward-fill empty seconds.

    A second is labeled anomalous if any sample falling in it is.
    """
    if len(run) == 0:
        raise ValueError("empty input")
    seconds = np.floor(run.timestamps).astype(np.int64)
    start, stop = int(seconds[0]), int(seconds[-1])
    n_out = stop - start + 1
    bucket = seconds - start

    sums = np.bincount(bucket, weights=run.values, minlength=n_out)
    counts = np.bincount(bucket, minlength=n_out)
    filled = counts > 0
    values = np.zeros(n_out)
    values[filled] = sums[filled] / counts[filled]
    # Forward fill: index of the last filled bucket at or before each position.
    last = np.maximum.accumulate(np.where(filled, np.arange(n_out), 0))
    values = values[last]

    labels = None
    if run.labels is not None:
        hits = np.bincount(bucket, weights=run.labels, minlength=n_out) > 0
        labels = hits[last].astype(np.int8)

    return Run(
        id=run.id,
        timestamps=np.arange(start, stop + 1, dtype=np.float64),
        values=values,
        labels=labels,
    )


def window_batch(run: Run, k: int, spec: AnomalySpec | None = None) -> WindowBatch:
    """Cut ``run`` into ``floor(len / k)`` non-overlapping windows.

    Windows holding at least one anomalous sample are typed with
    :func:`aeif.synth.label_window` when ``spec`` is given. If no spec is
    available, or the rule finds nothing, they are typed ``GLOBAL``.
    """
    if k < 2:
        raise ValueError(f"window length must be >= 2, got {k}")
    n = len(run) // k
    values = run.values[: n * k].reshape(n, k)
    run_ids = np.full(n, run.id, dtype=object)
    starts = np.arange(n, dtype=np.int64) * k
    if run.labels is None:
        return WindowBatch(values, run_ids, starts, None)

    flagged = run.labels[: n * k].reshape(n, k).any(axis=1)
    labels = np.zeros(n, dtype=np.int8)
    if spec is None:
        labels[flagged] = WindowLabel.GLOBAL
    else:
        from aeif.synth import label_windows

        typed = label_windows(values[flagged], spec)
        typed[typed == WindowLabel.NORMAL] = WindowLabel.GLOBAL
        labels[flagged] = typed
    return WindowBatch(values, run_ids, starts, labels)


def segment(run: Run, k: int, spec: AnomalySpec | None = None) -> list[Window]:
    return window_batch(run, k, spec).windows()


def fit_standardizer(windows: Sequence[Window] | WindowBatch | np.ndarray) -> Standardizer:
    """Per-dimension population mean and std; zero-variance dims are clamped."""
    x = _as_matrix(windows)
    if x.shape[0] == 0:
        raise ValueError("nothing to fit")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > STD_FLOOR, stds, STD_FLOOR)
    return Standardizer(means=means, stds=stds)


def standardize(s: Standardizer, w: Window) -> Window:
    return Window(
        values=s.transform(w.values),
        run_id=w.run_id,
        start_index=w.start_index,
        label=w.label,
    )


def _as_matrix(windows) -> np.ndarray:
    if isinstance(windows, WindowBatch):
        return windows.values
    if isinstance(windows, np.ndarray):
        return np.atleast_2d(windows).astype(np.float64)
    windows = list(windows)
    if not windows:
        return np.empty((0, 0))
    lengths = {len(w.values) for w in windows}
    if len(lengths) != 1:
        raise ValueError(f"windows have mixed lengths {sorted(lengths)}")
    return np.stack([np.asarray(w.values, dtype=np.float64) for w in windows])


def read_run_csv(path: str | Path) -> Run:
    """Read a ``timestamp,value[,label]`` CSV; the run id is the file stem."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[:2] != ["timestamp", "value"] or header[2:] not in ([], ["label"]):
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = [r for r in reader if r]
    has_labels = len(header) == 3
    ts = np.array([float(r[0]) for r in rows], dtype=np.float64)
    vals = np.array([float(r[1]) for r in rows], dtype=np.float64)
    labels = np.array([int(r[2]) for r in rows], dtype=np.int8) if has_labels else None
    return Run(id=path.stem, timestamps=ts, values=vals, labels=labels)


def write_run_csv(run: Run, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if run.labels is None:
            writer.writerow(["timestamp", "value"])
            for t, v in zip(run.timestamps, run.values):
                writer.writerow([_fmt(t), repr(float(v))])
        else:
            writer.writerow(["timestamp", "value", "label"])
            for t, v, lab in zip(run.timestamps, run.values, run.labels):
                writer.writerow([_fmt(t), repr(float(v)), int(lab)])


def _fmt(t: float) -> str:
    t = float(t)
    return str(int(t)) if t.is_integer() else repr(t)
