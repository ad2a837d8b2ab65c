"""Labeled synthetic beam-intensity runs with global and subtle anomalies.

Normal operation is a slowly wandering intensity level plus white noise.
Anomalies are injected on whole windows of ``window`` samples:

* global: full dropout to ~0, short spike above ``s_high``, or a sag below
  ``s_low``; every window they touch holds at least one out-of-band sample;
* subtle: a bounded oscillation that stays inside ``[s_low, s_high]`` but
  pushes the window's variability above ``alpha``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from aeif.timeseries import Run, WindowLabel, window_batch, write_run_csv

VARIABILITY_MEASURES = ("range", "std")


@dataclass(frozen=True)
class AnomalySpec:
    s_low: float = 80.0
    s_high: float = 120.0
    alpha: float = 4.0
    global_rate: float = 0.05
    subtle_rate: float = 0.05
    variability: str = "range"

    def __post_init__(self) -> None:
        if not self.s_low < self.s_high:
            raise ValueError(f"s_low ({self.s_low}) must be below s_high ({self.s_high})")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        for name in ("global_rate", "subtle_rate"):
            rate = getattr(self, name)
            if not 0 <= rate < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {rate}")
        if self.global_rate + self.subtle_rate >= 1:
            raise ValueError("global_rate + subtle_rate must be < 1")
        if self.variability not in VARIABILITY_MEASURES:
            raise ValueError(f"variability must be one of {VARIABILITY_MEASURES}")

    @property
    def contamination(self) -> float:
        return self.global_rate + self.subtle_rate


@dataclass(frozen=True)
class GeneratorConfig:
    """Corpus generation settings.

    ``baseline`` and ``noise_std`` default to the band center and ``alpha / 10``.
    ``drift_std`` is the stationary std of the slow level wander, which has a
    correlation time of ``drift_timescale_s`` seconds.
    """

    n_runs: int = 25
    run_length_s: int = 50_400
    baseline: float | None = None
    noise_std: float | None = None
    drift_std: float = 8.0
    drift_timescale_s: float = 3600.0
    window: int = 6
    subtle_event_windows: tuple[int, int] = (1, 20)
    seed: int = 0
    anomaly: AnomalySpec = field(default_factory=AnomalySpec)

    def __post_init__(self) -> None:
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.run_length_s < self.window:
            raise ValueError("run_length_s must cover at least one window")
        if self.noise_std is not None and self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.drift_std < 0 or self.drift_timescale_s <= 0:
            raise ValueError("drift_std must be >= 0 and drift_timescale_s > 0")
        lo, hi = self.subtle_event_windows
        if not 1 <= lo <= hi:
            raise ValueError("subtle_event_windows must satisfy 1 <= lo <= hi")
        b = self.resolved_baseline
        if not self.anomaly.s_low < b < self.anomaly.s_high:
            raise ValueError("baseline must lie strictly inside [s_low, s_high]")

    @property
    def resolved_baseline(self) -> float:
        a = self.anomaly
        return 0.5 * (a.s_low + a.s_high) if self.baseline is None else float(self.baseline)

    @property
    def resolved_noise_std(self) -> float:
        return self.anomaly.alpha / 10 if self.noise_std is None else float(self.noise_std)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["subtle_event_windows"] = list(self.subtle_event_windows)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> GeneratorConfig:
        d = dict(d)
        d["anomaly"] = AnomalySpec(**d.get("anomaly", {}))
        if "subtle_event_windows" in d:
            d["subtle_event_windows"] = tuple(d["subtle_event_windows"])
        return cls(**d)


def variability(values: np.ndarray, measure: str = "range") -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if measure == "range":
        return np.ptp(values, axis=-1)
    if measure == "std":
        return values.std(axis=-1)
    raise ValueError(f"unknown variability measure {measure!r}")


def label_window(values, spec: AnomalySpec) -> WindowLabel:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty window")
    return WindowLabel(int(label_windows(values[None, :], spec)[0]))


def label_windows(values: np.ndarray, spec: AnomalySpec) -> np.ndarray:
    """Vectorized :func:`label_window` over the rows of ``values``."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    out = np.full(values.shape[0], WindowLabel.NORMAL, dtype=np.int8)
    if values.shape[0] == 0:
        return out
    outside = ((values < spec.s_low) | (values > spec.s_high)).any(axis=1)
    busy = variability(values, spec.variability) > spec.alpha
    out[busy] = WindowLabel.SUBTLE
    out[outside] = WindowLabel.GLOBAL
    return out


@dataclass
class _Event:
    kind: str
    shape: str
    start_window: int
    n_windows: int
    duration_s: int

    def to_dict(self, k: int) -> dict:
        return {
            "kind": self.kind,
            "shape": self.shape,
            "start_index": self.start_window * k,
            "duration_s": self.duration_s,
            "n_windows": self.n_windows,
        }


def _level_wander(n: int, cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Ornstein-Uhlenbeck wander around the baseline, kept clear of the band edges."""
    a = cfg.anomaly
    base = cfg.resolved_baseline
    if cfg.drift_std == 0:
        return np.full(n, base)
    phi = np.exp(-1.0 / cfg.drift_timescale_s)
    innov = rng.normal(0.0, cfg.drift_std * np.sqrt(1 - phi**2), size=n)
    innov[0] = rng.normal(0.0, cfg.drift_std)
    wander = lfilter([1.0], [1.0, -phi], innov)
    margin = 6 * cfg.resolved_noise_std + 0.25 * a.alpha
    return np.clip(base + wander, a.s_low + margin, a.s_high - margin)


def _place(free: np.ndarray, length: int, rng: np.random.Generator) -> int | None:
    """Random start of a run of ``length`` free windows, or None if none exists."""
    n = free.size
    if length > n:
        return None
    # Windows [s, s + length) are free iff the count of busy windows in it is 0.
    busy = np.concatenate([[0], np.cumsum(~free)])
    ok = np.flatnonzero(busy[length:] - busy[: n - length + 1] == 0)
    if ok.size == 0:
        return None
    return int(ok[rng.integers(ok.size)])


def _inject_global(
    values: np.ndarray,
    labels: np.ndarray,
    free: np.ndarray,
    budget: int,
    cfg: GeneratorConfig,
    rng: np.random.Generator,
) -> list[_Event]:
    a = cfg.anomaly
    k = cfg.window
    band = a.s_high - a.s_low
    events: list[_Event] = []
    remaining = budget
    while remaining > 0:
        shape = ("dropout", "spike", "sag")[rng.integers(3)]
        if shape == "dropout":
            duration = int(rng.integers(10, 601))
        elif shape == "spike":
            duration = int(rng.integers(1, min(5, k) + 1))
        else:
            duration = int(rng.integers(30, 301))
        n_win = min(-(-duration // k), remaining)
        duration = min(duration, n_win * k)
        start_w = _place(free, n_win, rng)
        if start_w is None:
            break
        s = start_w * k
        if shape == "dropout":
            seg = np.abs(rng.normal(0.0, 0.01 * band, size=duration))
        elif shape == "spike":
            offset = int(rng.integers(0, k - duration + 1))
            s += offset
            seg = a.s_high + rng.uniform(0.1, 1.0) * band + rng.normal(0, cfg.resolved_noise_std, duration)
            seg = np.maximum(seg, a.s_high + 1e-6 * band)
        else:
            depth = rng.uniform(0.1, 0.5) * band
            ramp = np.arange(1, duration + 1) / duration
            seg = a.s_low - 0.02 * band - depth * ramp
            seg += rng.normal(0, cfg.resolved_noise_std, duration)
            seg = np.minimum(seg, a.s_low - 1e-6 * band)
        values[s : s + duration] = seg
        labels[s : s + duration] = 1
        free[start_w : start_w + n_win] = False
        events.append(_Event("global", shape, start_w, n_win, duration))
        remaining -= n_win
    return events


def _inject_subtle(
    values: np.ndarray,
    labels: np.ndarray,
    free: np.ndarray,
    budget: int,
    cfg: GeneratorConfig,
    rng: np.random.Generator,
) -> list[_Event]:
    a = cfg.anomaly
    k = cfg.window
    half_band = 0.5 * (a.s_high - a.s_low)
    lo_w, hi_w = cfg.subtle_event_windows
    events: list[_Event] = []
    remaining = budget
    while remaining > 0:
        n_win = min(int(rng.integers(lo_w, hi_w + 1)), remaining)
        start_w = _place(free, n_win, rng)
        if start_w is None:
            break
        amp = float(np.exp(rng.uniform(np.log(a.alpha / 2), np.log(half_band))))
        period = rng.uniform(2.5, 2.0 * k)
        for w in range(start_w, start_w + n_win):
            s = w * k
            level = values[s : s + k].copy()
            w_amp, w_period = amp, period
            for attempt in range(200):
                phase = rng.uniform(0, 2 * np.pi)
                t = np.arange(k)
                seg = np.clip(level + w_amp * np.sin(2 * np.pi * t / w_period + phase), a.s_low, a.s_high)
                if variability(seg, a.variability) > a.alpha:
                    break
                # Small amplitudes sampled off-peak may not clear alpha; widen gradually.
                w_period = rng.uniform(2.5, 2.0 * k)
                if attempt >= 10:
                    w_amp = min(w_amp * 1.05, half_band)
            else:
                raise RuntimeError("could not draw a subtle window above alpha")
            values[s : s + k] = seg
            labels[s : s + k] = 1
        free[start_w : start_w + n_win] = False
        events.append(_Event("subtle", "oscillation", start_w, n_win, n_win * k))
        remaining -= n_win
    return events


def generate_run(cfg: GeneratorConfig, index: int) -> tuple[Run, list[dict]]:
    """Generate run ``index`` of the corpus plus its anomaly inventory.

    Each run draws from its own stream seeded by ``(cfg.seed, index)``.
    """
    a = cfg.anomaly
    k = cfg.window
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    n = cfg.run_length_s
    n_windows = n // k

    values = _level_wander(n, cfg, rng) + rng.normal(0.0, cfg.resolved_noise_std, size=n)
    labels = np.zeros(n, dtype=np.int8)
    free = np.ones(n_windows, dtype=bool)

    events = _inject_global(values, labels, free, round(a.global_rate * n_windows), cfg, rng)
    events += _inject_subtle(values, labels, free, round(a.subtle_rate * n_windows), cfg, rng)

    # Noise alone may push a normal window over a threshold; mark such windows.
    run = Run(id=f"run_{index:03d}", timestamps=np.arange(n, dtype=np.float64), values=values, labels=labels)
    batch = window_batch(run, k, a)
    clean = batch.labels == WindowLabel.NORMAL
    rule = np.full(n_windows, WindowLabel.NORMAL, dtype=np.int8)
    rule[clean] = label_windows(batch.values[clean], a)
    relabel = np.flatnonzero(rule != WindowLabel.NORMAL)
    for w in relabel:
        labels[w * k : (w + 1) * k] = 1
    if relabel.size:
        run = Run(id=run.id, timestamps=run.timestamps, values=values, labels=labels)

    inventory = [e.to_dict(k) for e in events]
    inventory += [
        {"kind": "relabeled", "shape": WindowLabel(int(rule[w])).name.lower(),
         "start_index": int(w * k), "duration_s": k, "n_windows": 1}
        for w in relabel
    ]
    return run, inventory


def generate_corpus(cfg: GeneratorConfig) -> list[Run]:
    return [generate_run(cfg, i)[0] for i in range(cfg.n_runs)]


def write_corpus(cfg: GeneratorConfig, out_dir: str | Path) -> list[Run]:
    """Write one CSV per run plus ``manifest.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    inventory = {}
    for i in range(cfg.n_runs):
        run, events = generate_run(cfg, i)
        write_run_csv(run, out_dir / f"{run.id}.csv")
        batch = window_batch(run, cfg.window, cfg.anomaly)
        counts = np.bincount(batch.labels, minlength=3)
        inventory[run.id] = {
            "n_samples": len(run),
            "n_windows": len(batch),
            "window_counts": {lab.name.lower(): int(counts[lab]) for lab in WindowLabel},
            "events": events,
        }
        runs.append(run)
    manifest = {"config": cfg.to_dict(), "seed": cfg.seed, "runs": inventory}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return runs


def read_manifest(corpus_dir: str | Path) -> tuple[GeneratorConfig, dict]:
    manifest = json.loads((Path(corpus_dir) / "manifest.json").read_text())
    return GeneratorConfig.from_dict(manifest["config"]), manifest


def with_rates(cfg: GeneratorConfig, global_rate: float, subtle_rate: float) -> GeneratorConfig:
    return replace(cfg, anomaly=replace(cfg.anomaly, global_rate=global_rate, subtle_rate=subtle_rate))
