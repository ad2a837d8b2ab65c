"""Command-line entry point: aeif generate | train | detect | evaluate | report.

Any config field can be overridden with a flag of the same dotted name, e.g.
``aeif train --ae.epochs 50 --forest.n_trees 200``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from aeif import evaluation as ev
from aeif.config import ExperimentConfig, dump_config, load_config, parse_value
from aeif.experiment import batch_for, cross_validate, load_corpus
from aeif.pipeline import DetectorKind, FittedDetector, SplitPlan, default_tau, detect, fit_detector, make_split
from aeif.synth import write_corpus
from aeif.timeseries import read_run_csv, resample_1hz, window_batch

logger = logging.getLogger("aeif")


class CliError(Exception):
    pass


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _models_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.paths.out_dir) / "models"


def _corpus_tau(gen) -> float | None:
    return None if gen is None else default_tau(gen.anomaly.global_rate, gen.anomaly.subtle_rate)


def cmd_generate(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.paths.data_dir)
    try:
        runs = write_corpus(cfg.generator_config(), out)
    except OSError as exc:
        raise CliError(f"cannot write corpus to {out}: {exc}") from exc
    print(f"wrote {len(runs)} runs to {out}")
    return out


def cmd_train(cfg: ExperimentConfig) -> dict[DetectorKind, Path]:
    try:
        gen, runs = load_corpus(cfg.paths.data_dir)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from exc
    spec = gen.anomaly if gen is not None else None
    plan = make_split(list(runs), seed=cfg.split_seed, n_folds=cfg.cv.folds)
    dcfg = cfg.detector_config(_corpus_tau(gen))
    out = Path(cfg.paths.out_dir)
    models = _models_dir(cfg)
    _write(out / "split_plan.json", _dump_json(plan.to_dict()))

    if cfg.cv.enabled and plan.folds:
        cv = cross_validate(cfg.kinds, runs, plan, cfg.window, spec, dcfg)
        _write(out / "cv_report.json", _dump_json(cv.to_dict()))
        for kind, stats in cv.summary().items():
            print(f"cv {kind:7s} f1={stats['f1']:.3f} auc_pr={stats['auc_pr']:.3f}")

    dev = batch_for(runs, plan.dev_run_ids, cfg.window, spec)
    written = {}
    for kind in cfg.kinds:
        det = fit_detector(kind, dev, dcfg)
        path = models / f"{kind.value}.json"
        _write(path, det.dumps() + "\n")
        written[kind] = path
        print(f"trained {kind.value} -> {path}")
    manifest = {
        "detectors": [k.value for k in cfg.kinds],
        "config": cfg.to_dict(),
        "detector_config": dcfg.to_dict(),
        "seed": cfg.seed,
        "split_plan": plan.to_dict(),
    }
    _write(out / "train_manifest.json", _dump_json(manifest))
    return written


def _load_detector(path: Path) -> FittedDetector:
    if not path.exists():
        raise CliError(f"model {path} not found; run `aeif train` first")
    try:
        return FittedDetector.loads(path.read_text())
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"{path}: not a detector bundle ({exc})") from exc


def cmd_detect(cfg: ExperimentConfig, model_path: str | Path, run_path: str | Path, out_path: str | Path | None) -> str:
    det = _load_detector(Path(model_path))
    try:
        run = resample_1hz(read_run_csv(run_path))
    except (ValueError, IndexError) as exc:
        raise CliError(f"{run_path}: {exc}") from exc
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from exc
    if len(run) >= det.k:
        batch = window_batch(run, det.k)
        res = detect(det, batch)
        starts = batch.start_index
    else:
        res, starts = None, []
    lines = ["run_id,window_start_index,score,f_value,label"]
    if res is not None:
        for i, start in enumerate(starts):
            label = "anomaly" if res.is_anomaly[i] else "normal"
            lines.append(f"{run.id},{int(start)},{float(res.scores[i])!r},{float(res.f_values[i])!r},{label}")
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        _write(Path(out_path), text)
    return text


def cmd_evaluate(cfg: ExperimentConfig) -> list[ev.EvaluationReport]:
    out = Path(cfg.paths.out_dir)
    plan_path = out / "split_plan.json"
    if not plan_path.exists():
        raise CliError(f"{plan_path} not found; run `aeif train` first")
    plan = SplitPlan.from_dict(json.loads(plan_path.read_text()))
    detectors = {kind: _load_detector(_models_dir(cfg) / f"{kind.value}.json") for kind in cfg.kinds}
    try:
        gen, runs = load_corpus(cfg.paths.data_dir)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from exc
    missing = set(plan.test_run_ids) - set(runs)
    if missing:
        raise CliError(f"test runs missing from corpus: {sorted(missing)}")
    spec = gen.anomaly if gen is not None else None
    test = batch_for(runs, plan.test_run_ids, cfg.window, spec)
    if test.labels is None:
        raise CliError("test runs carry no labels")

    reports = ev.table1_report(detectors, test)
    _write(out / "evaluation.json", _dump_json({"reports": [r.to_dict() for r in reports]}))
    _write(out / "evaluation.csv", ev.reports_to_csv(reports))
    for kind, det in detectors.items():
        res = detect(det, test)
        _write(out / "pr_curves" / f"{kind.value}.csv", ev.pr_curve_csv(res.scores, test.labels))

    if {"raw", "pca", "mce_ae"} & {ev.SPACE_OF_KIND[k.value] for k in detectors}:
        try:
            sep = ev.detector_separability(detectors, test)
        except ValueError as exc:
            logger.warning("separability skipped: %s", exc)
        else:
            _write(out / "separability.json", _dump_json(sep.to_dict()))
            _write(out / "separability.csv", sep.to_csv())
            _write(out / "separability_medians.csv", sep.medians_csv())
    print(format_table(reports))
    return reports


def format_table(reports: Sequence[ev.EvaluationReport]) -> str:
    rows = [f"{'method':8s} {'recall':>7s} {'precision':>9s} {'f1':>6s} {'auc_pr':>7s} {'subtle_recall':>13s}"]
    for r in reports:
        sr = "-" if r.subtle_recall is None else f"{r.subtle_recall:.3f}"
        rows.append(f"{r.method:8s} {r.recall:7.3f} {r.precision:9.3f} {r.f1:6.3f} {r.auc_pr:7.3f} {sr:>13s}")
    return "\n".join(rows)


def cmd_report(cfg: ExperimentConfig) -> str:
    out = Path(cfg.paths.out_dir)
    path = out / "evaluation.json"
    if not path.exists():
        raise CliError(f"{path} not found; run `aeif evaluate` first")
    data = json.loads(path.read_text())
    reports = [
        ev.EvaluationReport(**{**r, "per_run": [ev.RunMetrics(**m) for m in r["per_run"]]})
        for r in data["reports"]
    ]
    parts = ["Average detection performance on the test runs", format_table(reports)]
    sep_path = out / "separability.json"
    if sep_path.exists():
        medians = json.loads(sep_path.read_text())["medians"]
        parts.append("Median relative distance of subtle anomalies from the normal mean")
        parts.extend(f"  {space:7s} {value:.4g}" for space, value in medians.items())
    cv_path = out / "cv_report.json"
    if cv_path.exists():
        summary = json.loads(cv_path.read_text())["summary"]
        parts.append("Cross-validation (mean over folds)")
        parts.extend(f"  {kind:7s} f1={s['f1']:.3f} auc_pr={s['auc_pr']:.3f}" for kind, s in summary.items())
    text = "\n".join(parts) + "\n"
    _write(out / "report.txt", text)
    sys.stdout.write(text)
    return text


def _split_overrides(extra: Sequence[str]) -> dict:
    """Turn ``--a.b value`` / ``--a.b=value`` leftovers into dotted overrides."""
    overrides = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise CliError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise CliError(f"missing value for {tok}")
            i += 1
            value = extra[i]
        overrides[key.replace("-", "_")] = parse_value(value)
        i += 1
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aeif", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train", "detect", "evaluate", "report", "config"):
        p = sub.add_parser(name)
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("--config", help="YAML experiment file (default: built-in defaults)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (paths.out_dir; corpus dir for generate)")
        p.add_argument("--data", help="corpus directory (paths.data_dir)")
        p.add_argument("--detector", action="append", help="detector kind; repeatable")
        if name == "detect":
            p.add_argument("--model", required=True, help="detector bundle JSON")
            p.add_argument("--run", required=True, help="run CSV to score")
            p.add_argument("--output", help="verdict CSV path (default: stdout)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _split_overrides(extra)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.data is not None:
            overrides["paths.data_dir"] = args.data
        if args.out is not None:
            overrides["paths.data_dir" if args.command == "generate" else "paths.out_dir"] = args.out
        if args.detector:
            overrides["detectors"] = [DetectorKind.parse(d).value for d in args.detector]
        cfg = load_config(args.config, overrides)

        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "detect":
            cmd_detect(cfg, args.model, args.run, args.output)
        elif args.command == "evaluate":
            cmd_evaluate(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        else:
            sys.stdout.write(dump_config(cfg))
    except (CliError, ValueError, FileNotFoundError) as exc:
        print(f"aeif {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
