"""Command-line entry point.

Subcommands: synth, cohort, build, logit, train, evaluate, pipeline,
report.  Exit codes: 0 success, 1 configuration/validation error, 2 data
error, 3 pipeline error (no company succeeded).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import dataset as ds_mod
from . import logit as logit_mod
from . import mlp as mlp_mod
from . import synth as synth_mod
from .config import (
    ENV_CONFIG_VAR,
    PipelineConfig,
    _SECTIONS,
    apply_overrides,
    load_config,
)
from .errors import (
    ConfigError,
    DataError,
    PipelineError,
    PricedirError,
    ValidationError,
)
from .pipeline import (
    cohort_report,
    load_membership_dir,
    render_report,
    run_pipeline,
)
from .synth import derive_seed


def _add_config_args(parser: argparse.ArgumentParser) -> dict[str, str]:
    """Register --config, --seed, and one dotted flag per config field.

    Returns the mapping from argparse dest back to the dotted name.
    """
    parser.add_argument(
        "--config",
        help=f"JSON config file (default: ${ENV_CONFIG_VAR} if set)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="master seed; derives cohort and mlp seeds",
    )
    dotted_by_dest: dict[str, str] = {}
    for section, cls in _SECTIONS.items():
        for fld in dataclasses.fields(cls):
            dotted = f"{section}.{fld.name}"
            dest = f"set__{section}__{fld.name}"
            parser.add_argument(f"--{dotted}", dest=dest, metavar="VALUE")
            dotted_by_dest[dest] = dotted
    for name in ("target_mode", "tickers", "workers"):
        dest = f"set__{name}"
        parser.add_argument(f"--{name}", dest=dest, metavar="VALUE")
        dotted_by_dest[dest] = name
    return dotted_by_dest


def _load_pipeline_config(args, dotted_by_dest: dict[str, str]) -> PipelineConfig:
    path = args.config or os.environ.get(ENV_CONFIG_VAR)
    cfg = load_config(path) if path else PipelineConfig()
    overrides = {}
    for dest, dotted in dotted_by_dest.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[dotted] = value
    apply_overrides(cfg, overrides)
    if args.seed is not None:
        cfg.cohort.seed = derive_seed(args.seed, "cohort")
        cfg.mlp.seed = derive_seed(args.seed, "mlp")
    return cfg.validate()


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)


def _cmd_synth(args) -> int:
    planted = synth_mod.default_planted()
    truth = synth_mod.write_fixture(
        out_dir=args.out,
        n_companies=args.companies,
        n_weeks=args.weeks,
        switch_prob=args.switch_prob,
        missing_prob=args.missing_prob,
        seed=args.seed,
        planted=planted,
        signal_scale=args.signal_scale,
        calibrate=args.calibrate,
        target_lo=args.bayes_lo,
        target_hi=args.bayes_hi,
    )
    sys.stdout.write(
        f"wrote {truth['n_weeks']} membership weeks and "
        f"{truth['n_companies']} panels under {args.out}\n"
        f"pooled Bayes accuracy: {truth['pooled_bayes_accuracy']:.4f}\n"
    )
    return 0


def _cmd_cohort(args) -> int:
    snapshots = load_membership_dir(args.membership_dir)
    doc = cohort_report(snapshots, args.per_group, args.seed, args.allow_deficient)
    _emit(doc, args.out)
    return 0


def _cmd_build(args, dotted_by_dest) -> int:
    from .ingest import parse_company_panel
    from .pipeline import build_company_dataset, discover_panels

    cfg = _load_pipeline_config(args, dotted_by_dest)
    snapshots = load_membership_dir(cfg.paths.membership_dir)
    panels = discover_panels(cfg.paths.panels_dir, cfg.tickers)
    out_dir = Path(cfg.paths.output_dir) / "datasets"
    out_dir.mkdir(parents=True, exist_ok=True)
    for ticker, path in sorted(panels.items()):
        panel = parse_company_panel(path.read_text("utf-8"), ticker, source=str(path))
        dataset, info = build_company_dataset(panel, snapshots, cfg)
        (out_dir / f"{ticker}.csv").write_text(
            ds_mod.dataset_csv_text(dataset), "utf-8"
        )
        meta = {
            "ticker": ticker,
            "dropped_columns": info["dropped_columns"],
            "timespan": info["timespan"],
            "n_rows": info["n_rows"],
            "columns": {
                name: {
                    "raw_min": m.raw_min,
                    "raw_max": m.raw_max,
                    "mean_used": m.observed_mean_normalized,
                    "imputed_count": m.imputed_count,
                    "degenerate": m.degenerate,
                }
                for name, m in dataset.column_meta.items()
            },
        }
        (out_dir / f"{ticker}.meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", "utf-8"
        )
        sys.stdout.write(f"built {ticker}: {dataset.n_rows} rows\n")
    return 0


def _read_dataset(path: str) -> ds_mod.LabeledDataset:
    file = Path(path)
    if not file.is_file():
        raise DataError(f"dataset file not found: {file}")
    return ds_mod.read_dataset_csv(file.read_text("utf-8"), file.stem, source=str(file))


def _cmd_logit(args) -> int:
    from .pipeline import logit_result_dict

    dataset = _read_dataset(args.dataset)
    fit = logit_mod.fit_logit(
        dataset.X,
        dataset.y,
        max_iter=args.max_iter,
        tol=args.tol,
        feature_names=dataset.feature_names,
    )
    selected = logit_mod.select_features(fit, args.alpha)
    _emit(logit_result_dict(dataset.ticker, fit, selected), args.out)
    return 0


def _split_for_args(dataset, train_fraction):
    return ds_mod.chronological_split(dataset, train_fraction)


def _cmd_train(args) -> int:
    dataset = _read_dataset(args.dataset)
    if args.features:
        dataset = dataset.select_columns([f.strip() for f in args.features.split(",")])
    train_ds, _ = _split_for_args(dataset, args.train_fraction)
    hidden = [int(h) for h in args.hidden_sizes.split(",")] if args.hidden_sizes else [8]
    sizes = [len(dataset.feature_names)] + hidden + [1]
    model = mlp_mod.init_network(sizes, derive_seed(args.seed, dataset.ticker, "init"))
    model, losses = mlp_mod.train(
        model,
        train_ds,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=derive_seed(args.seed, dataset.ticker, "train"),
    )
    doc = mlp_mod.model_to_dict(
        model,
        metadata={
            "ticker": dataset.ticker,
            "seed": args.seed,
            "epochs": args.epochs,
            "learning_rate": args.learning_rate,
            "batch_size": args.batch_size,
            "final_loss": losses[-1],
            "features": dataset.feature_names,
        },
    )
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", "utf-8")
    sys.stdout.write(f"trained {dataset.ticker}: final loss {losses[-1]:.6f}\n")
    return 0


def _cmd_evaluate(args) -> int:
    from .pipeline import eval_result_dict

    dataset = _read_dataset(args.dataset)
    model_doc = json.loads(Path(args.model).read_text("utf-8"))
    model = mlp_mod.model_from_dict(model_doc)
    features = model_doc.get("metadata", {}).get("features")
    if features:
        dataset = dataset.select_columns(features)
    _, test_ds = _split_for_args(dataset, args.train_fraction)
    report = mlp_mod.evaluate(model, test_ds, args.threshold)
    _emit(eval_result_dict(report), args.out)
    sys.stdout.write(f"{dataset.ticker} | {report.accuracy * 100:.2f}%\n")
    return 0


def _cmd_pipeline(args, dotted_by_dest) -> int:
    cfg = _load_pipeline_config(args, dotted_by_dest)
    report = run_pipeline(cfg)
    sys.stdout.write(render_report(report, "text"))
    return 0


def _cmd_report(args) -> int:
    file = Path(args.input)
    if not file.is_file():
        raise DataError(f"report file not found: {file}")
    report = json.loads(file.read_text("utf-8"))
    sys.stdout.write(render_report(report, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pricedir",
        description="Index-membership stock price direction prediction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fixture with known truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--companies", type=int, default=10)
    p.add_argument("--weeks", type=int, default=400)
    p.add_argument("--switch-prob", type=float, default=0.05)
    p.add_argument("--missing-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--signal-scale", type=float, default=None)
    p.add_argument(
        "--calibrate",
        action="store_true",
        help="binary-search the signal scale to a pooled Bayes accuracy window",
    )
    p.add_argument("--bayes-lo", type=float, default=0.73)
    p.add_argument("--bayes-hi", type=float, default=0.77)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("cohort", help="group companies by membership count and sample")
    p.add_argument("--membership-dir", required=True)
    p.add_argument("--per-group", type=int, default=10)
    p.add_argument("--seed", type=int, default=20020104)
    p.add_argument("--allow-deficient", action="store_true")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_cohort)

    p = sub.add_parser("build", help="build per-company labeled datasets")
    dotted = _add_config_args(p)
    p.set_defaults(func=lambda a, d=dotted: _cmd_build(a, d))

    p = sub.add_parser("logit", help="fit the logistic model on a built dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_logit)

    p = sub.add_parser("train", help="train the network on a built dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--features", help="comma-separated feature subset")
    p.add_argument("--hidden-sizes", help="comma-separated hidden layer sizes")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=8451)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a trained model on the test part")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full batch pipeline")
    dotted = _add_config_args(p)
    p.set_defaults(func=lambda a, d=dotted: _cmd_pipeline(a, d))

    p = sub.add_parser("report", help="re-render a report.json")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PricedirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
