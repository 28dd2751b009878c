"""End-to-end batch orchestration, per-company fail-soft, and reporting.

For every company panel: ingest, dataset build, logistic fit on all
features, significance selection, network training on the selected
features only, held-out evaluation.  One bad company never aborts the
batch; it becomes a failure entry in the report.  Output is fully
deterministic for a fixed config and inputs (company order is stabilized
by ticker, seeds are derived per company, no timestamps).
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from pathlib import Path

from . import cohort as cohort_mod
from . import dataset as ds_mod
from . import logit as logit_mod
from . import mlp as mlp_mod
from .config import TARGET_DIRECTION, PipelineConfig
from .errors import (
    ConfigError,
    DataError,
    PipelineError,
    PricedirError,
    ValidationError,
)
from .ingest import (
    CompanyPanel,
    MembershipSnapshot,
    parse_company_panel,
    parse_membership_file,
)
from .synth import GENERATOR_NAME, derive_seed

MEMBERSHIP_FILE_RE = re.compile(r"^constituents_(\d{4}-\d{2}-\d{2})\.csv$")

# Default strong-feature set used when significance selection comes back
# empty; a network with zero inputs is meaningless.
CANONICAL_FALLBACK_FEATURES = [
    ds_mod.MEMBERSHIP_COLUMN,
    "total_return_lag1w",
    "sentiment",
    "trades",
]


def load_membership_dir(path: str | Path) -> list[MembershipSnapshot]:
    """Parse every ``constituents_<requested-date>.csv`` in a directory."""
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"membership directory not found: {path}")
    snapshots = []
    for file in sorted(path.glob("*.csv")):
        match = MEMBERSHIP_FILE_RE.match(file.name)
        if not match:
            raise DataError(
                f"{file}: membership files must be named constituents_YYYY-MM-DD.csv"
            )
        requested = date.fromisoformat(match.group(1))
        snapshots.append(
            parse_membership_file(file.read_text("utf-8"), requested, source=str(file))
        )
    if not snapshots:
        raise DataError(f"no membership files in {path}")
    return snapshots


def discover_panels(path: str | Path, tickers=None) -> dict[str, Path]:
    """Map ticker -> panel file for every ``<ticker>.csv`` in a directory."""
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"panels directory not found: {path}")
    found = {file.stem: file for file in sorted(path.glob("*.csv"))}
    if tickers is not None:
        missing = [t for t in tickers if t not in found]
        if missing:
            raise DataError(f"no panel file for tickers {missing} in {path}")
        found = {t: found[t] for t in sorted(tickers)}
    if not found:
        raise DataError(f"no panel files in {path}")
    return found


def build_company_dataset(
    panel: CompanyPanel,
    snapshots: list[MembershipSnapshot],
    cfg: PipelineConfig,
) -> tuple[ds_mod.LabeledDataset, dict]:
    """Run the full dataset chain for one company.

    Order: membership indicator, lag columns, labels, sparse-column drop,
    timespan trim, then normalize/impute/assemble.  The raw price column
    is the label source and is never handed to the models; in membership
    target mode the indicator becomes the label and is likewise excluded
    from the features.
    """
    dcfg = cfg.dataset
    panel = ds_mod.attach_membership_indicator(panel, snapshots)
    panel = ds_mod.attach_lagged_features(panel, dcfg.lag_features)

    if cfg.target_mode == TARGET_DIRECTION:
        labels = ds_mod.attach_direction_label(panel, dcfg.price_column)
        exclude = {dcfg.price_column}
    else:
        labels = [int(v) for v in panel.column(ds_mod.MEMBERSHIP_COLUMN)]
        exclude = {dcfg.price_column, ds_mod.MEMBERSHIP_COLUMN}

    feature_panel = panel.without_columns(
        [c for c in panel.feature_names if c in exclude]
    )
    feature_panel, dropped = ds_mod.drop_sparse_columns(
        feature_panel, dcfg.max_missing_fraction
    )
    if not feature_panel.feature_names:
        raise DataError(f"panel {panel.ticker}: every feature column was dropped")

    required = list(feature_panel.feature_names)
    trim_input = feature_panel
    if cfg.target_mode == TARGET_DIRECTION:
        trim_input = feature_panel.with_columns(
            {dcfg.price_column: panel.column(dcfg.price_column)}
        )
        required.append(dcfg.price_column)
    trimmed = ds_mod.trim_timespan(trim_input, required)

    start = panel.dates.index(trimmed.dates[0])
    stop = start + trimmed.n_rows
    dataset = ds_mod.assemble_dataset(
        trimmed, labels[start:stop], feature_panel.feature_names
    )
    info = {
        "dropped_columns": dropped,
        "timespan": [trimmed.dates[0].isoformat(), trimmed.dates[-1].isoformat()],
        "n_rows": dataset.n_rows,
    }
    return dataset, info


def _json_float(value) -> float | None:
    value = float(value)
    return value if math.isfinite(value) else None


def logit_result_dict(ticker: str, fit: logit_mod.LogitFit, selected: list[str]) -> dict:
    return {
        "ticker": ticker,
        "coefficients": [
            {
                "name": name,
                "beta": _json_float(fit.beta[j]),
                "std_err": _json_float(fit.std_err[j]),
                "z": _json_float(fit.z_score[j]),
                "p": _json_float(fit.p_value[j]),
            }
            for j, name in enumerate(fit.feature_names)
        ],
        "log_likelihood": _json_float(fit.log_likelihood),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "separation_detected": fit.separation_detected,
        "selected": selected,
    }


def eval_result_dict(report: mlp_mod.EvalReport) -> dict:
    return {
        "n_test": report.n_test,
        "accuracy": report.accuracy,
        "true_pos": report.true_pos,
        "true_neg": report.true_neg,
        "false_pos": report.false_pos,
        "false_neg": report.false_neg,
        "threshold": report.threshold,
    }


def run_company(
    ticker: str,
    panel: CompanyPanel,
    snapshots: list[MembershipSnapshot],
    cfg: PipelineConfig,
    out_dir: Path | None = None,
) -> dict:
    """Dataset, logit selection, network training, and evaluation for one company."""
    dataset, build_info = build_company_dataset(panel, snapshots, cfg)

    fit = logit_mod.fit_logit(
        dataset.X,
        dataset.y,
        max_iter=cfg.logit.max_iter,
        tol=cfg.logit.tol,
        feature_names=dataset.feature_names,
    )
    selected = logit_mod.select_features(fit, cfg.logit.alpha)
    fallback_used = False
    if selected:
        mlp_features = selected
    else:
        fallback = set(CANONICAL_FALLBACK_FEATURES)
        mlp_features = [f for f in dataset.feature_names if f in fallback]
        if not mlp_features:
            raise DataError(
                f"{ticker}: no significant features and no canonical fallback "
                f"columns present"
            )
        fallback_used = True

    subset = dataset.select_columns(mlp_features)
    train_ds, test_ds = ds_mod.chronological_split(subset, cfg.dataset.train_fraction)

    init_seed = derive_seed(cfg.mlp.seed, ticker, "init")
    shuffle_seed = derive_seed(cfg.mlp.seed, ticker, "train")
    sizes = [len(mlp_features)] + list(cfg.mlp.hidden_sizes) + [1]
    model = mlp_mod.init_network(sizes, init_seed)
    model, loss_history = mlp_mod.train(
        model,
        train_ds,
        epochs=cfg.mlp.epochs,
        learning_rate=cfg.mlp.learning_rate,
        batch_size=cfg.mlp.batch_size,
        seed=shuffle_seed,
    )
    report = mlp_mod.evaluate(model, test_ds, cfg.mlp.threshold)

    if out_dir is not None:
        datasets_dir = out_dir / "datasets"
        logit_dir = out_dir / "logit"
        models_dir = out_dir / "models"
        for d in (datasets_dir, logit_dir, models_dir):
            d.mkdir(parents=True, exist_ok=True)
        (datasets_dir / f"{ticker}.csv").write_text(
            ds_mod.dataset_csv_text(dataset), "utf-8"
        )
        meta = {
            "ticker": ticker,
            "dropped_columns": build_info["dropped_columns"],
            "timespan": build_info["timespan"],
            "n_rows": build_info["n_rows"],
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
        (datasets_dir / f"{ticker}.meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", "utf-8"
        )
        (logit_dir / f"{ticker}.json").write_text(
            json.dumps(logit_result_dict(ticker, fit, selected), indent=2) + "\n",
            "utf-8",
        )
        model_doc = mlp_mod.model_to_dict(
            model,
            metadata={
                "ticker": ticker,
                "init_seed": init_seed,
                "shuffle_seed": shuffle_seed,
                "epochs": cfg.mlp.epochs,
                "learning_rate": cfg.mlp.learning_rate,
                "batch_size": cfg.mlp.batch_size,
                "final_loss": loss_history[-1],
                "features": mlp_features,
            },
        )
        (models_dir / f"{ticker}.json").write_text(
            json.dumps(model_doc, indent=2) + "\n", "utf-8"
        )

    return {
        "ticker": ticker,
        "status": "ok",
        "n_rows": dataset.n_rows,
        "n_train": train_ds.n_rows,
        "n_test": test_ds.n_rows,
        "timespan": build_info["timespan"],
        "dropped_columns": build_info["dropped_columns"],
        "logit": logit_result_dict(ticker, fit, selected),
        "selected": selected,
        "fallback_used": fallback_used,
        "mlp_features": mlp_features,
        "seeds": {"init": init_seed, "train": shuffle_seed},
        "hyperparameters": {
            "hidden_sizes": list(cfg.mlp.hidden_sizes),
            "epochs": cfg.mlp.epochs,
            "learning_rate": cfg.mlp.learning_rate,
            "batch_size": cfg.mlp.batch_size,
            "threshold": cfg.mlp.threshold,
        },
        "final_train_loss": loss_history[-1],
        "eval": eval_result_dict(report),
        "error": None,
    }


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every company in the panels directory and write the report.

    Per-company failures are recorded and skipped; zero successes raises
    PipelineError.  Returns the report document (also written as
    report.json and report.txt under the output directory).
    """
    cfg.validate()
    snapshots = load_membership_dir(cfg.paths.membership_dir)
    panels = discover_panels(cfg.paths.panels_dir, cfg.tickers)
    out_dir = Path(cfg.paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(item: tuple[str, Path]) -> dict:
        ticker, path = item
        try:
            panel = parse_company_panel(path.read_text("utf-8"), ticker, source=str(path))
            return run_company(ticker, panel, snapshots, cfg, out_dir)
        except PricedirError as exc:
            return {"ticker": ticker, "status": "failed", "error": str(exc)}

    items = sorted(panels.items())
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(process, items))
    else:
        results = [process(item) for item in items]
    results.sort(key=lambda r: r["ticker"])

    ok = [r for r in results if r["status"] == "ok"]
    if not ok:
        failures = "; ".join(f"{r['ticker']}: {r['error']}" for r in results)
        raise PipelineError(f"no company succeeded ({failures})")
    mean_accuracy = sum(r["eval"]["accuracy"] for r in ok) / len(ok)

    report = {
        "companies": results,
        "n_companies": len(results),
        "n_ok": len(ok),
        "n_failed": len(results) - len(ok),
        "mean_accuracy": mean_accuracy,
        "generator": GENERATOR_NAME,
        "config": cfg.to_dict(),
    }
    (out_dir / "report.json").write_text(render_report(report, "json"), "utf-8")
    (out_dir / "report.txt").write_text(render_report(report, "text"), "utf-8")
    return report


def render_report(report: dict, fmt: str) -> str:
    """Render a pipeline report as canonical JSON or a two-column text table."""
    if not report.get("companies"):
        raise ValidationError("report has no companies")
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    if fmt != "text":
        raise ValidationError(f"unknown report format {fmt!r}")

    rows = []
    for company in report["companies"]:
        if company["status"] == "ok":
            rows.append((company["ticker"], f"{company['eval']['accuracy'] * 100:.2f}%"))
    rows.append(("Mean", f"{report['mean_accuracy'] * 100:.2f}%"))
    width = max(len("Company Name"), max(len(name) for name, _ in rows))
    lines = [f"{'Company Name':<{width}} | Accuracy", f"{'-' * width}-+---------"]
    lines.extend(f"{name:<{width}} | {acc:>7}" for name, acc in rows)
    failed = [c for c in report["companies"] if c["status"] == "failed"]
    if failed:
        lines.append("")
        lines.append("Failed companies:")
        lines.extend(f"  {c['ticker']}: {c['error']}" for c in failed)
    return "\n".join(lines) + "\n"


def cohort_report(
    snapshots: list[MembershipSnapshot],
    per_group: int,
    seed: int,
    allow_deficient: bool = False,
) -> dict:
    """Counts, equal-width groups, and the sampled cohort as a JSON document."""
    counts = cohort_mod.membership_counts(snapshots)
    groups = cohort_mod.partition_into_fifths(counts)
    sample = cohort_mod.sample_cohort(groups, per_group, seed, allow_deficient)
    return {
        "group_boundaries": cohort_mod.group_boundaries(counts),
        "groups": [
            {
                "index": g.group_index,
                "size": len(g.members),
                "members": sorted(g.members),
            }
            for g in groups
        ],
        "sample": sorted(sample),
        "per_group": per_group,
        "seed": seed,
        "generator": cohort_mod.GENERATOR_NAME,
    }
