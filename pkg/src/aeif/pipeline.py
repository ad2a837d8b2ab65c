"""The three detectors (IF on raw windows, PCA-IF, AE-IF) over shared preprocessing.

Every variant standardizes windows with statistics fitted on the training
windows, maps them to a feature space, and thresholds an isolation forest
score. Only AE-IF uses labels, to keep anomalous windows out of the
autoencoder's training set.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from aeif import autoencoder as ae
from aeif import iforest
from aeif.pca import PcaModel, fit_pca, transform_pca
from aeif.timeseries import Standardizer, WindowBatch, WindowLabel, fit_standardizer

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.1


class DetectorKind(str, Enum):
    IF_RAW = "IF_RAW"
    PCA_IF = "PCA_IF"
    AE_IF = "AE_IF"

    @classmethod
    def parse(cls, name: str) -> DetectorKind:
        key = name.strip().upper().replace("-", "_")
        aliases = {"IF": "IF_RAW", "RAW": "IF_RAW", "PCA": "PCA_IF", "AE": "AE_IF"}
        return cls(aliases.get(key, key))


def derive_seed(seed: int, *tags) -> int:
    """Independent 32-bit seed for a named sub-stream of ``seed``."""
    words = [seed] + [t if isinstance(t, int) else int.from_bytes(str(t).encode(), "little") for t in tags]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@dataclass(frozen=True)
class DetectorConfig:
    tau: float | None = None  # None -> DEFAULT_TAU
    n_trees: int = 100
    psi: int = 256
    pca_components: int = 2
    pca_variance_coverage: float | None = None
    ae: ae.TrainConfig = field(default_factory=ae.TrainConfig)
    mce_absolute: bool = False
    seed: int = 0

    @property
    def resolved_tau(self) -> float:
        return DEFAULT_TAU if self.tau is None else float(self.tau)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> DetectorConfig:
        d = dict(d)
        d["ae"] = ae.TrainConfig(**d.get("ae", {}))
        return cls(**d)


@dataclass(frozen=True)
class FittedDetector:
    kind: DetectorKind
    standardizer: Standardizer
    forest: iforest.IsolationForestModel
    ae: ae.AutoencoderModel | None = None
    pca: PcaModel | None = None
    mce_absolute: bool = False

    def __post_init__(self) -> None:
        if (self.ae is not None) != (self.kind is DetectorKind.AE_IF):
            raise ValueError("an autoencoder is required for AE_IF and only for AE_IF")
        if (self.pca is not None) != (self.kind is DetectorKind.PCA_IF):
            raise ValueError("a PCA model is required for PCA_IF and only for PCA_IF")

    @property
    def k(self) -> int:
        return self.standardizer.dim

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "k": self.k,
            "mce_absolute": self.mce_absolute,
            "standardizer": self.standardizer.to_dict(),
            "pca": None if self.pca is None else self.pca.to_dict(),
            "ae": None if self.ae is None else self.ae.to_dict(),
            "forest": self.forest.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FittedDetector:
        return cls(
            kind=DetectorKind(d["kind"]),
            standardizer=Standardizer.from_dict(d["standardizer"]),
            forest=iforest.IsolationForestModel.from_dict(d["forest"]),
            ae=None if d.get("ae") is None else ae.AutoencoderModel.from_dict(d["ae"]),
            pca=None if d.get("pca") is None else PcaModel.from_dict(d["pca"]),
            mce_absolute=bool(d.get("mce_absolute", False)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, s: str) -> FittedDetector:
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class Fold:
    train_ids: list[str]
    val_ids: list[str]


@dataclass(frozen=True)
class SplitPlan:
    dev_run_ids: list[str]
    test_run_ids: list[str]
    folds: list[Fold]
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SplitPlan:
        return cls(
            dev_run_ids=list(d["dev_run_ids"]),
            test_run_ids=list(d["test_run_ids"]),
            folds=[Fold(list(f["train_ids"]), list(f["val_ids"])) for f in d["folds"]],
            seed=int(d["seed"]),
        )


def make_split(run_ids, seed: int = 0, n_folds: int = 10, dev_fraction: float = 0.6) -> SplitPlan:
    """Run-level 60/40 dev/test split plus repeated 2:1 train/validation draws.

    The folds are seeded random re-partitions of the dev runs, not disjoint
    k-fold slices: 15 dev runs cannot be cut into 10 disjoint 10/5 folds.
    """
    ids = sorted(str(r) for r in run_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate run ids")
    n = len(ids)
    if n < 5:
        raise ValueError(f"need at least 5 runs, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    perm = [ids[i] for i in rng.permutation(n)]
    n_dev = int(round(dev_fraction * n))
    dev, test = sorted(perm[:n_dev]), sorted(perm[n_dev:])
    n_train = int(round(len(dev) * 2 / 3))
    folds = []
    for f in range(n_folds):
        frng = np.random.default_rng(np.random.SeedSequence([seed, 1, f]))
        order = [dev[i] for i in frng.permutation(len(dev))]
        folds.append(Fold(sorted(order[:n_train]), sorted(order[n_train:])))
    return SplitPlan(dev_run_ids=dev, test_run_ids=test, folds=folds, seed=seed)


def _stack(features: np.ndarray) -> np.ndarray:
    return features[:, None] if features.ndim == 1 else features


def fit_detector(kind: DetectorKind | str, train: WindowBatch, config: DetectorConfig | None = None) -> FittedDetector:
    """Fit one detector on labeled training windows.

    Labels are read only by AE-IF, to select the normal windows the
    autoencoder learns from; the forest always sees every training window.
    """
    kind = DetectorKind.parse(kind) if isinstance(kind, str) else kind
    config = config or DetectorConfig()
    if len(train) < 2:
        raise ValueError("need at least 2 training windows")
    std = fit_standardizer(train)
    z = std.transform(train.values)
    forest_seed = derive_seed(config.seed, "forest", kind.value)
    tau = config.resolved_tau

    pca_model = None
    ae_model = None
    if kind is DetectorKind.IF_RAW:
        feats = z
    elif kind is DetectorKind.PCA_IF:
        pca_model = fit_pca(z, config.pca_components, config.pca_variance_coverage)
        feats = transform_pca(pca_model, z)
    else:
        if train.labels is None:
            raise ValueError("AE_IF needs window labels to select normal training data")
        normal = train.labels == WindowLabel.NORMAL
        if not normal.any():
            raise ValueError("AE_IF needs at least one normal training window")
        cfg = replace(config.ae, seed=derive_seed(config.seed, "ae", config.ae.seed))
        ae_model, _ = ae.train(cfg, z[normal], train.labels[normal], standardizer=std)
        feats = ae.mce_features(ae_model, z, absolute=config.mce_absolute)

    forest = iforest.fit(_stack(feats), config.n_trees, config.psi, tau, forest_seed)
    logger.info("fitted %s on %d windows (threshold %.4f)", kind.value, len(train), forest.score_threshold)
    return FittedDetector(kind, std, forest, ae=ae_model, pca=pca_model, mce_absolute=config.mce_absolute)


def feature_map(d: FittedDetector, windows) -> np.ndarray:
    """Feature vectors the forest sees: ``(n, k)``, ``(n, n_components)`` or ``(n, 1)``.

    A single window (1-D input) yields a single feature vector.
    """
    values = windows.values if isinstance(windows, WindowBatch) else np.asarray(windows, dtype=np.float64)
    single = values.ndim == 1
    values = np.atleast_2d(values)
    if values.shape[0] == 0:
        dims = {DetectorKind.IF_RAW: d.k, DetectorKind.AE_IF: 1}
        return np.empty((0, dims.get(d.kind, d.pca.n_components if d.pca else 0)))
    z = d.standardizer.transform(values)
    if d.kind is DetectorKind.IF_RAW:
        out = z
    elif d.kind is DetectorKind.PCA_IF:
        out = transform_pca(d.pca, z)
    else:
        out = ae.mce_features(d.ae, z, absolute=d.mce_absolute)[:, None]
    return out[0] if single else out


@dataclass(frozen=True)
class Detections:
    scores: np.ndarray
    f_values: np.ndarray
    is_anomaly: np.ndarray

    def __len__(self) -> int:
        return int(self.scores.size)


def detect(d: FittedDetector, windows) -> Detections:
    feats = feature_map(d, windows)
    if feats.shape[0] == 0:
        return Detections(np.empty(0), np.empty(0), np.empty(0, dtype=bool))
    s, f, flag = iforest.decision_function(d.forest, feats)
    return Detections(s, f, flag)


def fit_all(kinds, train: WindowBatch, config: DetectorConfig) -> dict[DetectorKind, FittedDetector]:
    return {DetectorKind.parse(k) if isinstance(k, str) else k: fit_detector(k, train, config) for k in kinds}


def default_tau(global_rate: float, subtle_rate: float) -> float:
    tau = global_rate + subtle_rate
    return tau if 0 < tau <= 0.5 else DEFAULT_TAU


def expected_flag_count(n: int, tau: float) -> int:
    return int(math.floor(tau * n + 1e-9))
