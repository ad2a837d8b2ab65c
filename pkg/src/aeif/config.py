"""Experiment configuration: one nested YAML document plus dotted overrides.

Every field has a default, so an empty document reproduces the reference
experiment. Overrides use dotted names (``ae.epochs=50``) and may come from
the command line or from ``AEIF_``-prefixed environment variables, where
``__`` separates levels (``AEIF_AE__EPOCHS=50``).
"""

from __future__ import annotations

import copy
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from aeif.autoencoder import TrainConfig
from aeif.pipeline import DetectorConfig, DetectorKind, derive_seed
from aeif.synth import AnomalySpec, GeneratorConfig

ENV_PREFIX = "AEIF_"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    psi: int = 256


@dataclass(frozen=True)
class PcaParams:
    n_components: int = 2
    variance_coverage: float | None = None


@dataclass(frozen=True)
class CvParams:
    enabled: bool = True
    folds: int = 10


@dataclass(frozen=True)
class Paths:
    data_dir: str = "out/corpus"
    out_dir: str = "out"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    window: int = 6
    detectors: tuple[str, ...] = ("IF_RAW", "PCA_IF", "AE_IF")
    tau: float | None = None  # None -> corpus contamination from the manifest
    mce_absolute: bool = False
    paths: Paths = field(default_factory=Paths)
    forest: ForestParams = field(default_factory=ForestParams)
    ae: TrainConfig = field(default_factory=TrainConfig)
    pca: PcaParams = field(default_factory=PcaParams)
    cv: CvParams = field(default_factory=CvParams)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)

    def __post_init__(self) -> None:
        if not self.detectors:
            raise ValueError("at least one detector is required")
        for d in self.detectors:
            DetectorKind.parse(d)
        if self.window < 2:
            raise ValueError("window must be >= 2")

    @property
    def kinds(self) -> list[DetectorKind]:
        return [DetectorKind.parse(d) for d in self.detectors]

    def generator_config(self) -> GeneratorConfig:
        return replace(self.generator, seed=self.seed, window=self.window)

    def detector_config(self, tau: float | None) -> DetectorConfig:
        return DetectorConfig(
            tau=self.tau if self.tau is not None else tau,
            n_trees=self.forest.n_trees,
            psi=self.forest.psi,
            pca_components=self.pca.n_components,
            pca_variance_coverage=self.pca.variance_coverage,
            ae=self.ae,
            mce_absolute=self.mce_absolute,
            seed=derive_seed(self.seed, "detector"),
        )

    @property
    def split_seed(self) -> int:
        return derive_seed(self.seed, "split")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detectors"] = list(self.detectors)
        gen = self.generator.to_dict()
        # The generator seed and window follow the top-level fields.
        gen.pop("seed")
        gen.pop("window")
        d["generator"] = gen
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> ExperimentConfig:
        d = dict(d or {})
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw: dict[str, Any] = {k: v for k, v in d.items() if k not in _NESTED}
        if "detectors" in kw:
            dets = kw["detectors"]
            kw["detectors"] = tuple([dets] if isinstance(dets, str) else dets)
        for name, typ in _NESTED.items():
            if name in d and d[name] is not None:
                kw[name] = _build(typ, d[name], name)
        return cls(**kw)


_NESTED = {
    "paths": Paths,
    "forest": ForestParams,
    "ae": TrainConfig,
    "pca": PcaParams,
    "cv": CvParams,
    "generator": GeneratorConfig,
}


def _build(typ, d: Mapping[str, Any], where: str):
    d = dict(d)
    allowed = set(typ.__dataclass_fields__)
    if typ is GeneratorConfig:
        allowed -= {"seed", "window"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown keys under {where!r}: {sorted(unknown)}")
    if typ is GeneratorConfig:
        d["anomaly"] = _build(AnomalySpec, d.get("anomaly") or {}, f"{where}.anomaly")
        if "subtle_event_windows" in d:
            d["subtle_event_windows"] = tuple(d["subtle_event_windows"])
    return typ(**d)


def set_dotted(d: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = d
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot set {dotted!r}: {key!r} is not a section")
    node[keys[-1]] = value


def parse_value(text: str) -> Any:
    """Interpret an override value as YAML (numbers, booleans, null, lists)."""
    return yaml.safe_load(text) if text.strip() else ""


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX) and len(key) > len(ENV_PREFIX):
            dotted = key[len(ENV_PREFIX):].lower().replace("__", ".")
            out[dotted] = parse_value(value)
    return out


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> ExperimentConfig:
    """Defaults, then the YAML file, then environment, then explicit overrides."""
    raw: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is not None and not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        raw = copy.deepcopy(loaded or {})
    for dotted, value in env_overrides(environ).items():
        set_dotted(raw, dotted, value)
    for dotted, value in (overrides or {}).items():
        set_dotted(raw, dotted, value)
    return ExperimentConfig.from_dict(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
