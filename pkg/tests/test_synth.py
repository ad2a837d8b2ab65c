import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aeif.synth import (
    AnomalySpec,
    GeneratorConfig,
    generate_corpus,
    generate_run,
    label_window,
    label_windows,
    read_manifest,
    with_rates,
    write_corpus,
)
from aeif.timeseries import WindowLabel, read_run_csv, window_batch

SMALL = GeneratorConfig(n_runs=3, run_length_s=6000, seed=11)


class TestLabelWindow:
    spec = AnomalySpec(s_low=0.0, s_high=100.0, alpha=4.0)

    def test_threshold_violation_is_global(self):
        assert label_window([5, 5, 5, 5, 5, 120], self.spec) is WindowLabel.GLOBAL

    def test_flat_midpoint_is_normal(self):
        assert label_window([50.0] * 6, self.spec) is WindowLabel.NORMAL

    def test_range_twice_alpha_is_subtle(self):
        assert label_window([50, 58, 50, 54, 50, 52], self.spec) is WindowLabel.SUBTLE

    def test_range_equal_alpha_is_normal(self):
        assert label_window([50, 54, 50, 54, 50, 54], self.spec) is WindowLabel.NORMAL

    def test_std_measure(self):
        spec = AnomalySpec(s_low=0.0, s_high=100.0, alpha=3.0, variability="std")
        # Alternating +-4: std 4 > 3, range 8.
        assert label_window([46, 54, 46, 54, 46, 54], spec) is WindowLabel.SUBTLE
        assert label_window([49, 51, 49, 51, 49, 51], spec) is WindowLabel.NORMAL

    def test_empty(self):
        with pytest.raises(ValueError):
            label_window([], self.spec)

    @given(
        st.lists(st.floats(-50, 150, allow_nan=False), min_size=1, max_size=12),
        st.floats(-1e3, 1e3, allow_nan=False),
    )
    def test_shift_invariance(self, values, shift):
        # Shifts are whole numbers so the comparisons are not perturbed by rounding.
        shift = float(round(shift))
        shifted = AnomalySpec(self.spec.s_low + shift, self.spec.s_high + shift, self.spec.alpha)
        v = np.round(np.asarray(values), 3)
        assert label_window(v, self.spec) == label_window(v + shift, shifted)


class TestSpecValidation:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(s_low=10, s_high=5),
            dict(alpha=0),
            dict(global_rate=-0.1),
            dict(global_rate=0.6, subtle_rate=0.5),
            dict(variability="iqr"),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AnomalySpec(**kw)

    def test_invalid_generator(self):
        with pytest.raises(ValueError):
            GeneratorConfig(n_runs=0)
        with pytest.raises(ValueError):
            GeneratorConfig(baseline=500.0)


class TestGenerator:
    def test_no_injection_is_all_normal(self):
        cfg = with_rates(SMALL, 0.0, 0.0)
        for run in generate_corpus(cfg):
            assert not run.labels.any()
            assert run.values.min() >= cfg.anomaly.s_low
            assert run.values.max() <= cfg.anomaly.s_high

    def test_deterministic(self):
        a = generate_corpus(SMALL)
        b = generate_corpus(SMALL)
        for ra, rb in zip(a, b):
            assert ra.values.tobytes() == rb.values.tobytes()
            assert ra.labels.tobytes() == rb.labels.tobytes()

    def test_runs_are_independent_streams(self):
        # Generating run 2 alone matches generating the whole corpus.
        alone, _ = generate_run(SMALL, 2)
        assert alone.values.tobytes() == generate_corpus(SMALL)[2].values.tobytes()

    def test_injected_rates(self):
        # 6 runs x 10,000 windows; each type should land within 5% +- 2 points.
        cfg = GeneratorConfig(n_runs=6, run_length_s=60_000, seed=5)
        counts = np.zeros(3)
        total = 0
        for run in generate_corpus(cfg):
            b = window_batch(run, cfg.window, cfg.anomaly)
            counts += np.bincount(b.labels, minlength=3)
            total += len(b)
        assert abs(counts[WindowLabel.GLOBAL] / total - 0.05) <= 0.02
        assert abs(counts[WindowLabel.SUBTLE] / total - 0.05) <= 0.02

    def test_label_consistency(self):
        cfg = SMALL
        spec = cfg.anomaly
        for run in generate_corpus(cfg):
            b = window_batch(run, cfg.window, spec)
            sample_flags = run.labels[: len(b) * cfg.window].reshape(len(b), cfg.window)
            rule = label_windows(b.values, spec)
            # Windows with perturbed samples carry the rule's type; the rest are clean.
            flagged = sample_flags.any(axis=1)
            np.testing.assert_array_equal(b.labels[flagged], rule[flagged])
            assert np.all(rule[~flagged] == WindowLabel.NORMAL)
            # Globally labeled samples sit in windows that break the band.
            glob = b.labels == WindowLabel.GLOBAL
            outside = (b.values < spec.s_low) | (b.values > spec.s_high)
            assert np.all(outside[glob].any(axis=1))
            # Subtle windows stay inside the band.
            sub = b.labels == WindowLabel.SUBTLE
            assert np.all(~outside[sub])

    def test_global_shapes_present(self):
        cfg = GeneratorConfig(n_runs=2, run_length_s=30_000, seed=2)
        shapes = set()
        for i in range(cfg.n_runs):
            _, inv = generate_run(cfg, i)
            shapes |= {e["shape"] for e in inv if e["kind"] == "global"}
        assert shapes == {"dropout", "spike", "sag"}


def test_write_corpus(tmp_path):
    cfg = GeneratorConfig(n_runs=2, run_length_s=600, seed=1)
    runs = write_corpus(cfg, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json", "run_000.csv", "run_001.csv"]
    back = read_run_csv(tmp_path / "run_001.csv")
    np.testing.assert_array_equal(back.values, runs[1].values)
    np.testing.assert_array_equal(back.labels, runs[1].labels)
    gen, manifest = read_manifest(tmp_path)
    assert gen == cfg
    assert manifest["runs"]["run_000"]["n_windows"] == 100
    json.dumps(manifest)
