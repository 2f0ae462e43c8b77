"""Command-line surface: ingest, synth, train, eval, ablate.

Every command is one process and one reproducible run: the effective
configuration (defaults < config file < flags) is echoed into the output
directory as `run.cfg`, and its digest guards against accidentally resuming
a directory with different settings. Exit codes: 0 success, 1 usage error,
2 data error, 3 numeric failure.

The environment variable CROSSREC_OUT sets the default output root.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from . import run as runner
from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_digest, load_config_file, parse_value, save_config_file
from .crossnet import ABLATION_VARIANTS
from .data import Granularity, ingest_movielens
from .synth import SynthConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

MF_MODELS = ("mf-listwise", "mf-pointwise", "mf-bpr", "pop", "timepop")
ALL_MODELS = MF_MODELS + ("crossnet",)

_MF_DEFAULTS = {"holdout_fraction": 0.1, "d": 32, "epochs": 60, "lr": 0.005,
                "neg_ratio": 4, "seed": 0, "granularity": "biweekly",
                "trace_auc": True}
_CROSSNET_DEFAULTS = {"test_intervals": 1, "epochs": 60, "lr": 0.001,
                      "embed_dim": 32, "item_dim": 32, "user_dim": 16,
                      "dropout": 0.3, "neg_ratio": 4, "incremental_epochs": 5,
                      "top_k": 10, "seed": 0, "variant": "full",
                      "normalize_history": False}


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


def _out_root() -> Path:
    return Path(os.environ.get("CROSSREC_OUT", "."))


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _merge_options(defaults: dict, args) -> dict:
    options = dict(defaults)
    if getattr(args, "config", None):
        options.update(load_config_file(args.config))
    for flag in ("seed", "epochs", "d", "lr"):
        value = getattr(args, flag, None)
        if value is not None:
            options[flag] = value
    for assignment in getattr(args, "set", None) or []:
        if "=" not in assignment:
            raise UsageError(f"--set expects key=value, got {assignment!r}")
        key, _, value = assignment.partition("=")
        options[key.strip()] = parse_value(value)
    return options


def _prepare_run_dir(out_dir: Path, options: dict) -> str:
    """Echo the effective config; refuse a reused directory with another digest."""
    digest = config_digest(options)
    cfg_path = out_dir / "run.cfg"
    if cfg_path.exists():
        previous = config_digest(load_config_file(cfg_path))
        if previous != digest:
            raise ValueError(f"{out_dir} already holds a run with config digest "
                             f"{previous}, refusing to overwrite with {digest}")
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config_file(cfg_path, options)
    return digest


def _check_finite(name: str, arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"{name}: non-finite values (NaN/inf) in results")


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    source = Path(args.path)
    if args.format != "movielens":
        raise UsageError(f"unknown format {args.format!r}")
    interactions = ingest_movielens(source)
    out_dir = Path(args.out) if args.out else _out_root() / f"dataset-{source.stem}"
    manifest = runner.write_interactions_dataset(out_dir, interactions, args.format)
    print(f"ingested {manifest['events']} events: {manifest['users']} users, "
          f"{manifest['items']} items, {manifest['distinct_pairs']} distinct pairs")
    print(f"sparsity {manifest['sparsity']:.4%}")
    print(f"wrote {out_dir / 'interactions.csv'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    options = {"users": 100, "items": 300, "topics": 16, "intervals": 8,
               "new_user_fraction": 0.3, "base_sparsity": 0.99,
               "outlier_intervals": [], "outlier_strength": 0.0,
               "drift_rate": 0.05, "seed": 0}
    if args.config:
        options.update(load_config_file(args.config))
    for assignment in args.set or []:
        if "=" not in assignment:
            raise UsageError(f"--set expects key=value, got {assignment!r}")
        key, _, value = assignment.partition("=")
        options[key.strip()] = parse_value(value)
    if args.seed is not None:
        options["seed"] = args.seed
    raw = options.get("outlier_intervals", [])
    if isinstance(raw, (int, float)):
        raw = [int(raw)]
    config = SynthConfig(users=int(options["users"]), items=int(options["items"]),
                         topics=int(options["topics"]),
                         intervals=int(options["intervals"]),
                         new_user_fraction=float(options["new_user_fraction"]),
                         base_sparsity=float(options["base_sparsity"]),
                         outlier_intervals=frozenset(int(t) for t in raw),
                         outlier_strength=float(options["outlier_strength"]),
                         drift_rate=float(options["drift_rate"]),
                         seed=int(options["seed"]))
    dataset = generate(config)
    out_dir = Path(args.out) if args.out else _out_root() / f"dataset-synth-{config.seed}"
    manifest = runner.write_synth_dataset(dataset, out_dir)
    print(f"generated {manifest['events']} events over {config.intervals} intervals "
          f"({config.users} users, {config.items} items, {config.topics} topics)")
    print(f"config digest {manifest['config_digest']}")
    print(f"wrote {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.model not in ALL_MODELS:
        raise UsageError(f"unknown model {args.model!r}; choose from {ALL_MODELS}")
    data_path = Path(args.data)

    if args.model == "crossnet":
        dataset = runner.load_cross_dataset(data_path)
        user_opts = _merge_options({}, args)
        options = dict(_CROSSNET_DEFAULTS)
        options.update(user_opts)
        if "train_intervals" not in user_opts:
            options["train_intervals"] = (dataset.grid.count
                                          - int(options["test_intervals"]))
    else:
        options = _merge_options(_MF_DEFAULTS, args)
    options["model"] = args.model
    options["data"] = str(args.data)

    out_dir = Path(args.out) if args.out else _out_root() / f"run-{args.model}"
    digest = _prepare_run_dir(out_dir, options)
    dataset_digest = _file_digest(data_path / "interactions.csv"
                                  if data_path.is_dir() else data_path)
    meta = {"config_digest": digest, "dataset_digest": dataset_digest,
            "seed": int(options["seed"])}

    if args.model == "crossnet":
        model, losses = runner.train_crossnet_model(dataset, options)
        tensors = model.params()
        _check_finite(args.model, tensors.values())
        save_checkpoint(out_dir / "checkpoint", tensors, args.model, meta)
        report.write_crossnet_trace(out_dir / "trace_new.csv", losses, "new")
        report.write_crossnet_trace(out_dir / "trace_existing.csv", losses, "existing")
        report.plot_crossnet_trace(out_dir / "trace.png", losses)
        final = losses[-1] if losses else None
        if final is not None:
            _check_finite(args.model, [np.array([final.total])])
            print(f"trained crossnet for {len(losses)} epochs; final losses: "
                  f"new {final.listwise_new + final.attention_new:.4f}, "
                  f"existing {final.listwise_existing + final.attention_existing:.4f}")
    else:
        interactions = runner.load_interactions_dataset(data_path)
        tensors, trace, _ = runner.train_mf_model(
            args.model, interactions, options,
            trace_auc=bool(options.get("trace_auc", True)))
        _check_finite(args.model, tensors.values())
        if trace:
            _check_finite(args.model, [np.array([s.loss for s in trace])])
        save_checkpoint(out_dir / "checkpoint", tensors, args.model, meta)
        report.write_mf_trace(out_dir / "trace.csv", trace)
        report.plot_mf_trace(out_dir / "trace.png", trace, title=args.model)
        if trace:
            print(f"trained {args.model}: epoch-1 loss {trace[0].loss:.4f} -> "
                  f"epoch-{trace[-1].epoch} loss {trace[-1].loss:.4f}")
        else:
            print(f"trained {args.model}")
    print(f"config digest {digest}")
    print(f"wrote {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    run_dir = Path(args.run)
    options = load_config_file(run_dir / "run.cfg")
    model_name = str(options.get("model"))
    tensors, manifest = load_checkpoint(run_dir / "checkpoint")
    if manifest["model"] != model_name:
        raise ValueError(f"checkpoint holds model {manifest['model']!r} but the run "
                         f"config names {model_name!r}")
    data_path = Path(args.data) if args.data else Path(str(options["data"]))
    metric_names = [m.strip() for m in args.metrics.split(",")] if args.metrics else None
    out_dir = Path(args.out) if args.out else run_dir

    if model_name == "crossnet":
        dataset = runner.load_cross_dataset(data_path)
        config = runner.crossnet_config_from(dataset, options)
        existing = [u for u, kind in dataset.kinds.items()
                    if kind.value == "existing"]
        from .crossnet import CrossNetModel
        model = CrossNetModel(config, existing, dataset.catalog)
        model.set_params(tensors)
        names = metric_names or ["hr", "auc", "novelty", "diversity"]
        _validate_metrics(names)
        result = runner.evaluate_crossnet_model(model, dataset, options, names)
        eval_report = result.report
        for kind, value in sorted(result.per_kind_hr.items()):
            eval_report.add_scalar(f"hr@{options.get('top_k', 10)}_{kind}", value)
    else:
        interactions = runner.load_interactions_dataset(data_path)
        context = runner.prepare_mf_context(interactions,
                                            float(options.get("holdout_fraction", 0.1)),
                                            int(options.get("seed", 0)))
        names = metric_names or ["hr", "auc", "novelty"]
        _validate_metrics(names)
        item_vectors = None
        topics_path = data_path / "item_topics.csv" if data_path.is_dir() else None
        if topics_path and topics_path.exists():
            from .data import load_item_topics
            item_vectors = load_item_topics(topics_path)
        eval_report = runner.evaluate_mf(model_name, tensors, context, names,
                                         item_vectors=item_vectors)

    eval_report.metadata = {"config_digest": manifest["meta"].get("config_digest"),
                            "dataset_digest": manifest["meta"].get("dataset_digest"),
                            "seed": int(options.get("seed", 0)),
                            "model": model_name}
    report.write_per_user_metrics(out_dir / "metrics_users.csv", eval_report)
    report.write_summary(out_dir / "metrics_summary.csv", eval_report)
    report.plot_report(out_dir / "metrics.png", eval_report, title=model_name)
    with (out_dir / "eval_meta.json").open("w", encoding="utf-8") as handle:
        json.dump({"metadata": eval_report.metadata,
                   "included": eval_report.included,
                   "excluded": eval_report.excluded}, handle, indent=2, sort_keys=True)
        handle.write("\n")
    for metric in sorted(eval_report.summary):
        print(f"{metric}: {eval_report.summary[metric]:.4f}")
    print(f"wrote {out_dir / 'metrics_summary.csv'}")
    return EXIT_OK


def _validate_metrics(names) -> None:
    unknown = set(names) - {"hr", "auc", "novelty", "diversity"}
    if unknown:
        raise UsageError(f"unknown metrics: {sorted(unknown)}")


def cmd_ablate(args) -> int:
    if args.model != "crossnet":
        raise UsageError("ablation applies to the crossnet model only")
    dataset = runner.load_cross_dataset(Path(args.data))
    user_opts = _merge_options({}, args)
    options = dict(_CROSSNET_DEFAULTS)
    options.update(user_opts)
    if "train_intervals" not in user_opts:
        options["train_intervals"] = (dataset.grid.count
                                      - int(options["test_intervals"]))
    seeds = [int(s) for s in str(args.seeds).split(",")] if args.seeds else [1, 2, 3]
    options["model"] = "crossnet-ablation"
    options["data"] = str(args.data)
    options["seeds"] = seeds

    out_dir = Path(args.out) if args.out else _out_root() / "run-ablation"
    _prepare_run_dir(out_dir, options)
    table = runner.run_ablation(dataset, options, seeds)
    report.write_ablation_table(out_dir / "ablation.csv", table)
    report.plot_ablation(out_dir / "ablation.png", table)
    print(f"{'variant':<14} {'hr_overall':>10} {'hr_new':>8} {'hr_existing':>12}")
    for variant in ABLATION_VARIANTS:
        row = table[variant]
        print(f"{variant:<14} {row.get('overall', 0.0):>10.4f} "
              f"{row.get('new', 0.0):>8.4f} {row.get('existing', 0.0):>12.4f}")
    print(f"wrote {out_dir / 'ablation.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossrec",
                                     description="time-aware cross-network "
                                                 "recommender experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a raw ratings file into a dataset dir")
    p.add_argument("path", help="source file")
    p.add_argument("--format", default="movielens")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic cross-network dataset")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write a checkpoint + trace")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run")
    p.add_argument("--run", required=True, help="run directory from `train`")
    p.add_argument("--data", default=None, help="override the dataset path")
    p.add_argument("--metrics", default=None, help="hr,auc,novelty,diversity")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare temporal-component ablations")
    p.add_argument("--data", required=True)
    p.add_argument("--model", default="crossnet")
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seeds", default=None, help="comma-separated, default 1,2,3")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
