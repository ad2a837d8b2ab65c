"""Isolation-forest anomaly detection on sensor time-series windows.

Three detectors share one preprocessing front-end: an isolation forest on
standardized raw windows, on their PCA projection, and on the mean cubic
reconstruction error of an autoencoder trained on normal windows (AE-IF).
"""

from aeif.autoencoder import TrainConfig
from aeif.experiment import run_experiment
from aeif.pipeline import DetectorConfig, DetectorKind, FittedDetector, detect, fit_detector, make_split
from aeif.synth import AnomalySpec, GeneratorConfig, generate_corpus, generate_run
from aeif.timeseries import Run, Window, WindowBatch, WindowLabel, fit_standardizer, window_batch

__all__ = [
    "AnomalySpec",
    "DetectorConfig",
    "DetectorKind",
    "FittedDetector",
    "GeneratorConfig",
    "Run",
    "TrainConfig",
    "Window",
    "WindowBatch",
    "WindowLabel",
    "detect",
    "fit_detector",
    "fit_standardizer",
    "generate_corpus",
    "generate_run",
    "make_split",
    "run_experiment",
    "window_batch",
]

__version__ = "0.1.0"
