import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from aeif.cli import main
from aeif.config import ExperimentConfig, dump_config, env_overrides, load_config
from aeif.pipeline import FittedDetector, detect
from aeif.timeseries import read_run_csv, resample_1hz, window_batch

ROOT = Path(__file__).resolve().parents[1]

SMALL = {
    "seed": 4,
    "forest": {"n_trees": 15},
    "ae": {"epochs": 3},
    "cv": {"folds": 2},
    "generator": {"n_runs": 6, "run_length_s": 1800},
}


class TestConfig:
    def test_default_file_matches_code(self):
        assert load_config(ROOT / "experiment.default") == ExperimentConfig()
        assert (ROOT / "experiment.default").read_text() == dump_config(ExperimentConfig())

    def test_dump_round_trip(self):
        cfg = ExperimentConfig.from_dict(SMALL)
        assert ExperimentConfig.from_dict(yaml.safe_load(dump_config(cfg))) == cfg

    def test_precedence(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: 1\nae:\n  epochs: 10\nforest:\n  psi: 128\n")
        cfg = load_config(path, {"ae.epochs": 20}, environ={"AEIF_AE__EPOCHS": "15", "AEIF_FOREST__PSI": "64"})
        assert cfg.seed == 1
        assert cfg.ae.epochs == 20
        assert cfg.forest.psi == 64

    def test_env_parsing(self):
        got = env_overrides({"AEIF_GENERATOR__ANOMALY__ALPHA": "2.5", "PATH": "/bin", "AEIF_": "x"})
        assert got == {"generator.anomaly.alpha": 2.5}

    @pytest.mark.parametrize(
        "raw", [{"bogus": 1}, {"ae": {"nope": 1}}, {"generator": {"seed": 3}}, {"generator": {"n_runs": 0}}]
    )
    def test_rejects_bad_documents(self, raw):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(raw)

    def test_generator_follows_top_level(self):
        cfg = ExperimentConfig.from_dict({"seed": 9, "window": 8})
        gen = cfg.generator_config()
        assert (gen.seed, gen.window) == (9, 8)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.yaml"
    cfg.write_text(yaml.safe_dump(SMALL))
    data, out = root / "corpus", root / "out"
    common = ["--config", str(cfg), "--data", str(data)]
    assert main(["generate", "--config", str(cfg), "--out", str(data)]) == 0
    assert main(["train", *common, "--out", str(out)]) == 0
    assert main(["evaluate", *common, "--out", str(out)]) == 0
    assert main(["report", *common, "--out", str(out)]) == 0
    return root, data, out, common


class TestCli:
    def test_artifacts(self, workspace):
        _, data, out, _ = workspace
        assert len(list(data.glob("*.csv"))) == 6
        for name in ("split_plan.json", "cv_report.json", "train_manifest.json", "evaluation.json",
                     "evaluation.csv", "separability.json", "separability_medians.csv", "report.txt"):
            assert (out / name).exists(), name
        for kind in ("IF_RAW", "PCA_IF", "AE_IF"):
            assert (out / "models" / f"{kind}.json").exists()
            assert (out / "pr_curves" / f"{kind}.csv").exists()
        assert len(json.loads((out / "cv_report.json").read_text())["folds"]["AE_IF"]) == 2

    def test_report_mentions_every_detector(self, workspace):
        text = (workspace[2] / "report.txt").read_text()
        for kind in ("IF_RAW", "PCA_IF", "AE_IF"):
            assert kind in text

    def test_detect_matches_library(self, workspace, tmp_path):
        _, data, out, common = workspace
        model = out / "models" / "AE_IF.json"
        run_csv = data / "run_000.csv"
        dest = tmp_path / "v.csv"
        assert main(["detect", *common, "--model", str(model), "--run", str(run_csv), "--output", str(dest)]) == 0
        rows = list(csv.DictReader(dest.open()))
        det = FittedDetector.loads(model.read_text())
        batch = window_batch(resample_1hz(read_run_csv(run_csv)), det.k)
        res = detect(det, batch)
        assert len(rows) == len(batch)
        np.testing.assert_array_equal([float(r["score"]) for r in rows], res.scores)
        np.testing.assert_array_equal([int(r["window_start_index"]) for r in rows], batch.start_index)
        for r in rows:
            assert (r["label"] == "anomaly") == (float(r["f_value"]) < 0)

    def test_detect_short_run_writes_header_only(self, workspace, tmp_path):
        _, _, out, common = workspace
        short = tmp_path / "short.csv"
        short.write_text("timestamp,value\n0,100\n1,101\n2,99\n")
        dest = tmp_path / "v.csv"
        model = out / "models" / "IF_RAW.json"
        assert main(["detect", *common, "--model", str(model), "--run", str(short), "--output", str(dest)]) == 0
        assert dest.read_text() == "run_id,window_start_index,score,f_value,label\n"

    def test_detect_to_stdout(self, workspace, capsys):
        _, data, out, common = workspace
        assert main(["detect", *common, "--model", str(out / "models" / "PCA_IF.json"),
                     "--run", str(data / "run_001.csv")]) == 0
        assert capsys.readouterr().out.startswith("run_id,window_start_index,score,f_value,label\n")

    def test_missing_corpus(self, tmp_path, capsys):
        assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1
        assert "does not exist" in capsys.readouterr().err

    def test_missing_model(self, tmp_path, capsys):
        assert main(["detect", "--model", str(tmp_path / "m.json"), "--run", str(tmp_path / "r.csv")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_zero_runs_rejected(self, tmp_path, capsys):
        assert main(["generate", "--out", str(tmp_path / "c"), "--generator.n_runs", "0"]) == 1
        assert "error" in capsys.readouterr().err

    def test_evaluate_before_train(self, tmp_path):
        assert main(["evaluate", "--out", str(tmp_path)]) == 1

    def test_unknown_override(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), "--forest.depth", "3"]) == 1

    def test_config_command(self, capsys):
        assert main(["config", "--ae.epochs=7", "--detector", "ae"]) == 0
        cfg = ExperimentConfig.from_dict(yaml.safe_load(capsys.readouterr().out))
        assert cfg.ae.epochs == 7 and cfg.detectors == ("AE_IF",)
