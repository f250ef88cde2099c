"""Command-line entry point: ``gaf-advforge <command> [options]``.

Commands mirror the experiment steps: ``synth``, ``train``, ``attack-sample``,
``merge``, ``attack-eval``, ``experiment`` and ``report``.  Every command
records the artifacts it writes (with SHA-256 hashes) in a ``manifest.json``
next to its output and refuses inputs whose recorded hash no longer matches.

Exit codes: 0 success, 2 usage/config error, 3 data/generation error,
4 numerical failure.  Errors are also written to stderr as one JSON object.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import attack, cnn, datagen, dataset, pipeline, report
from .config import Config, from_dict, load_config
from .errors import ConfigError, DatasetFormatError, GafAdvError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
_EXIT = {"config": EXIT_USAGE, "data": EXIT_DATA, "numeric": EXIT_NUMERIC}
MANIFEST = "manifest.json"


def default_config_doc() -> dict:
    text = resources.files("gaf_advforge").joinpath("default_config.json").read_text()
    return json.loads(text)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _manifest_path(out: Path) -> Path:
    return (out if out.is_dir() else out.parent) / MANIFEST


def _record(step: str, out: Path, artifacts, args, cfg: Config):
    path = _manifest_path(out)
    doc = json.loads(path.read_text()) if path.exists() else {"steps": {}}
    base = path.parent
    doc["steps"][step] = {
        "config": str(args.config) if args.config else None,
        "master_seed": cfg.experiment.master_seed,
        "output": os.path.relpath(out, base),
        "artifacts": {
            os.path.relpath(p, base): _sha256(p) for p in sorted(set(map(Path, artifacts)))
        },
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _verify_input(path) -> Path:
    """Check an input against any manifest hash recorded beside it."""
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"input not found: {path}")
    man = path.parent / MANIFEST
    if man.exists():
        doc = json.loads(man.read_text())
        rel = os.path.relpath(path, man.parent)
        for step in doc.get("steps", {}).values():
            recorded = step.get("artifacts", {}).get(rel)
            if recorded and recorded != _sha256(path):
                raise DatasetFormatError(f"{path} does not match the hash recorded in {man}")
    return path


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else from_dict(default_config_doc())
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _save_dataset(ds, out: Path) -> list:
    dataset.save(ds, out)
    return [out, dataset.sidecar_path(out)]


def _counts_line(ds) -> str:
    return " ".join(f"{k}:{v}" for k, v in ds.class_counts().items())


def cmd_synth(args):
    cfg = _config(args)
    gen = replace(cfg.generator, rule_params=cfg.rules)
    ds = datagen.build_dataset(gen)
    out = Path(args.out)
    _record("synth", out, _save_dataset(ds, out), args, cfg)
    print(f"{len(ds)} items  {_counts_line(ds)}")


def cmd_train(args):
    cfg = _config(args)
    data = dataset.load(_verify_input(args.data))
    model, acc = cnn.train(cfg.train.seed, data, cfg.train)
    out = Path(args.out)
    cnn.save_model(model, out)
    _record("train", out, [out], args, cfg)
    print(json.dumps({"validation_accuracy": acc}))


def _model(args):
    if getattr(args, "stub_label", None) is not None:
        return cnn.ConstantModel(args.stub_label)
    if not args.model:
        raise ConfigError("either --model or --stub-label is required")
    return cnn.load_model(_verify_input(args.model))


def cmd_attack_sample(args):
    cfg = _config(args)
    data = dataset.load(_verify_input(args.data))
    pool = attack.sample_pool(_model(args), data, cfg.attack, cfg.rules)
    out = Path(args.out)
    _record("attack-sample", out, _save_dataset(pool, out), args, cfg)
    print(json.dumps(pipeline.pool_summary(pool), sort_keys=True))


def cmd_merge(args):
    cfg = _config(args)
    clean = dataset.load(_verify_input(args.clean))
    adv = dataset.load(_verify_input(args.adversarial))
    merged = pipeline.merge_datasets(clean, adv, cfg.merge)
    out = Path(args.out)
    _record("merge", out, _save_dataset(merged, out), args, cfg)
    print(f"{len(merged)} items  {_counts_line(merged)}")


def cmd_attack_eval(args):
    cfg = _config(args)
    data = dataset.load(_verify_input(args.data))
    table = attack.attack_eval(_model(args), data, cfg.attack).to_dict()
    text = json.dumps(table, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        _record("attack-eval", out, [out], args, cfg)
    sys.stdout.write(text)


def cmd_experiment(args):
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = pipeline.run_experiment(cfg, jobs=args.jobs, checkpoint_dir=out / "checkpoints")
    report_path = out / "report.json"
    report_path.write_text(rep.to_json())
    paths = report.write_report(rep.to_dict(), out)
    _record("experiment", out, [report_path, *paths.values()], args, cfg)
    print(report.render_tables(rep.to_dict()))


def cmd_report(args):
    src = _verify_input(args.report)
    try:
        doc = json.loads(src.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{src}: invalid JSON ({exc})") from None
    if args.out:
        report.write_report(doc, args.out)
    sys.stdout.write(report.render_tables(doc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaf-advforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="JSON config (default: bundled desk config)")
        p.add_argument("--seed", type=int, help="override every seed in the config")
        p.set_defaults(fn=fn)
        return p

    p = command("synth", cmd_synth, "generate a clean synthetic dataset")
    p.add_argument("--out", type=Path, required=True)

    p = command("train", cmd_train, "train a classifier on a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = command("attack-sample", cmd_attack_sample, "collect failed attacks as adversarial data")
    p.add_argument("--model", type=Path)
    p.add_argument("--stub-label", type=int, choices=range(1, 9), metavar="{1..8}")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = command("merge", cmd_merge, "merge clean and adversarial datasets")
    p.add_argument("--clean", type=Path, required=True)
    p.add_argument("--adversarial", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = command("attack-eval", cmd_attack_eval, "measure attack success rates")
    p.add_argument("--model", type=Path)
    p.add_argument("--stub-label", type=int, choices=range(1, 9), metavar="{1..8}",
                   help="attack a constant classifier instead of a trained model")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path)

    p = command("experiment", cmd_experiment, "run the full clean-vs-merged experiment")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel training runs")

    p = sub.add_parser("report", help="render a report JSON as tables and CSV")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--out", type=Path, help="directory for tables.txt and CSV files")
    p.set_defaults(fn=cmd_report, config=None)
    return parser


def _setup_logging():
    level = os.environ.get("GAF_ADVFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except GafAdvError as exc:
        return _fail(exc, _EXIT[exc.category])
    except OSError as exc:
        return _fail(exc, EXIT_DATA)
    return EXIT_OK


def _fail(exc, code) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
