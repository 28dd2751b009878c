"""Per-company dataset construction.

Turns a raw company panel plus the weekly membership snapshots into a
normalized, imputed, labeled matrix: membership indicator, direction
label, one-week lags, sparse-column removal, timespan trimming, min-max
normalization, mean imputation, and the chronological train/test split.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyColumnError,
    EmptyTimespanError,
    InsufficientHistoryError,
    InvalidSplitError,
    UncoveredDateError,
    ValidationError,
)
from .ingest import CompanyPanel, MembershipSnapshot

MEMBERSHIP_COLUMN = "in_index"
LAG_SUFFIX = "_lag1w"


@dataclass
class ColumnMeta:
    """Normalization and imputation record for one feature column."""

    raw_min: float
    raw_max: float
    observed_mean_normalized: float
    imputed_count: int
    degenerate: bool = False


@dataclass
class LabeledDataset:
    """Aligned, fully numeric (X, y) for one company.

    Every entry of X lies in [0, 1]; y holds only 0 and 1; dates are
    strictly increasing and row-aligned with X and y.
    """

    ticker: str
    dates: list[date]
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    column_meta: dict[str, ColumnMeta] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.dates)
        if self.X.shape != (n, len(self.feature_names)) or self.y.shape != (n,):
            raise ValidationError(
                f"dataset {self.ticker}: misaligned shapes "
                f"(X {self.X.shape}, y {self.y.shape}, {n} dates)"
            )
        for prev, nxt in zip(self.dates, self.dates[1:]):
            if nxt <= prev:
                raise ValidationError(
                    f"dataset {self.ticker}: dates not strictly increasing"
                )

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    def select_columns(self, names: Sequence[str]) -> "LabeledDataset":
        """Column subset in the given order (used to hand models their features)."""
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise ValidationError(f"dataset {self.ticker}: unknown columns {missing}")
        idx = [self.feature_names.index(n) for n in names]
        return LabeledDataset(
            self.ticker,
            list(self.dates),
            list(names),
            self.X[:, idx].copy(),
            self.y.copy(),
            {n: self.column_meta[n] for n in names if n in self.column_meta},
        )


def attach_membership_indicator(
    panel: CompanyPanel, snapshots: list[MembershipSnapshot]
) -> CompanyPanel:
    """Add the 0/1 ``in_index`` column from the covering weekly snapshots.

    Each row date must fall inside exactly one snapshot week
    [requested - 6 days, requested]; rows outside every week raise
    UncoveredDateError listing the offending dates.
    """
    if not snapshots:
        raise ValidationError("attach_membership_indicator needs snapshots")
    ordered = sorted(snapshots, key=lambda s: s.requested_date)
    requested = [s.requested_date for s in ordered]

    indicator: list[Optional[float]] = []
    uncovered: list[date] = []
    for day in panel.dates:
        i = bisect_left(requested, day)
        if i == len(ordered) or not ordered[i].covers(day):
            uncovered.append(day)
            indicator.append(None)
            continue
        indicator.append(1.0 if panel.ticker in ordered[i].constituents else 0.0)
    if uncovered:
        raise UncoveredDateError(
            f"panel {panel.ticker}: no snapshot week covers "
            f"{[d.isoformat() for d in uncovered]}"
        )
    return panel.with_columns({MEMBERSHIP_COLUMN: indicator})


def attach_direction_label(
    panel: CompanyPanel, price_column: str
) -> list[Optional[int]]:
    """Week-over-week price direction labels aligned to the panel rows.

    label[t] is 1 when price rose from t-1 to t and 0 otherwise (a flat
    price counts as non-increase).  The first row and any row whose own
    or prior price is missing get None.
    """
    prices = panel.column(price_column)
    labels: list[Optional[int]] = [None] * panel.n_rows
    for t in range(1, panel.n_rows):
        if prices[t] is None or prices[t - 1] is None:
            continue
        labels[t] = 1 if prices[t] > prices[t - 1] else 0
    if not any(lbl is not None for lbl in labels):
        raise InsufficientHistoryError(
            f"panel {panel.ticker}: fewer than 2 consecutive usable prices "
            f"in {price_column!r}"
        )
    return labels


def attach_lagged_features(
    panel: CompanyPanel, features: Sequence[str]
) -> CompanyPanel:
    """Add ``<f>_lag1w`` columns holding each feature's prior-week value."""
    new: dict[str, list[Optional[float]]] = {}
    for name in features:
        source = panel.column(name)
        new[name + LAG_SUFFIX] = [None] + source[:-1]
    return panel.with_columns(new)


def drop_sparse_columns(
    panel: CompanyPanel, max_missing_fraction: float
) -> tuple[CompanyPanel, list[str]]:
    """Remove columns whose missing fraction strictly exceeds the threshold."""
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValidationError("max_missing_fraction must be in [0, 1]")
    if panel.n_rows == 0:
        return panel, []
    dropped = []
    for name in panel.feature_names:
        missing = sum(1 for v in panel.columns[name] if v is None)
        if missing / panel.n_rows > max_missing_fraction:
            dropped.append(name)
    return panel.without_columns(dropped), dropped


def trim_timespan(panel: CompanyPanel, required: Sequence[str]) -> CompanyPanel:
    """Cut the panel to its longest usable contiguous stretch of rows.

    Rows where every required column is missing split the panel into
    candidate runs; each run is then trimmed so it starts and ends on a
    row where all required columns are present (interior gaps stay, for
    imputation).  The longest trimmed run wins, ties going to the more
    recent one.  No fully-present row anywhere raises EmptyTimespanError.
    """
    if not required:
        raise ValidationError("trim_timespan needs at least one required column")
    cols = [panel.column(name) for name in required]

    def anchor(t: int) -> bool:
        return all(col[t] is not None for col in cols)

    def void(t: int) -> bool:
        return all(col[t] is None for col in cols)

    best: Optional[tuple[int, int]] = None  # (start, stop) half-open
    t = 0
    n = panel.n_rows
    while t < n:
        if void(t):
            t += 1
            continue
        run_start = t
        while t < n and not void(t):
            t += 1
        anchors = [i for i in range(run_start, t) if anchor(i)]
        if not anchors:
            continue
        start, stop = anchors[0], anchors[-1] + 1
        # ">=" keeps the later run on equal length
        if best is None or stop - start >= best[1] - best[0]:
            best = (start, stop)
    if best is None:
        raise EmptyTimespanError(
            f"panel {panel.ticker}: no row has all of {list(required)} present"
        )
    return panel.slice_rows(*best)


def normalize_column(
    values: Sequence[Optional[float]],
) -> tuple[list[Optional[float]], float, float]:
    """Min-max scale observed values into [0, 1]; missing stays missing.

    A constant column maps every observed value to 0.0 (degenerate range,
    recorded via raw_min == raw_max in the column metadata).
    """
    observed = [v for v in values if v is not None]
    if not observed:
        raise EmptyColumnError("cannot normalize a column with no observed values")
    if not all(math.isfinite(v) for v in observed):
        raise ValidationError("cannot normalize non-finite values")
    raw_min = min(observed)
    raw_max = max(observed)
    if raw_max == raw_min:
        return [None if v is None else 0.0 for v in values], raw_min, raw_max
    span = raw_max - raw_min
    if not math.isfinite(span):
        raise ValidationError("column range overflows floating point")
    return (
        [None if v is None else (v - raw_min) / span for v in values],
        raw_min,
        raw_max,
    )


def impute_missing(
    values: Sequence[Optional[float]],
) -> tuple[list[float], float, int]:
    """Fill missing entries with the mean of the observed entries."""
    observed = [v for v in values if v is not None]
    if not observed:
        raise EmptyColumnError("cannot impute a column with no observed values")
    mean_used = sum(observed) / len(observed)
    imputed_count = len(values) - len(observed)
    return [mean_used if v is None else v for v in values], mean_used, imputed_count


def assemble_dataset(
    panel: CompanyPanel,
    labels: Sequence[Optional[int]],
    feature_names: Sequence[str],
) -> LabeledDataset:
    """Normalize and impute the named features, keep labeled rows, build (X, y)."""
    if len(labels) != panel.n_rows:
        raise ValidationError(
            f"panel {panel.ticker}: {len(labels)} labels for {panel.n_rows} rows"
        )
    filled: dict[str, list[float]] = {}
    meta: dict[str, ColumnMeta] = {}
    for name in feature_names:
        normalized, raw_min, raw_max = normalize_column(panel.column(name))
        column, mean_used, imputed_count = impute_missing(normalized)
        filled[name] = column
        meta[name] = ColumnMeta(
            raw_min=raw_min,
            raw_max=raw_max,
            observed_mean_normalized=mean_used,
            imputed_count=imputed_count,
            degenerate=raw_min == raw_max,
        )
    keep = [t for t, lbl in enumerate(labels) if lbl is not None]
    X = np.array(
        [[filled[name][t] for name in feature_names] for t in keep], dtype=float
    ).reshape(len(keep), len(feature_names))
    y = np.array([labels[t] for t in keep], dtype=int)
    return LabeledDataset(
        panel.ticker, [panel.dates[t] for t in keep], list(feature_names), X, y, meta
    )


def chronological_split(
    ds: LabeledDataset, train_fraction: float
) -> tuple[LabeledDataset, LabeledDataset]:
    """First ceil(fraction * n) rows train, the rest test; no shuffling.

    The ceiling is taken in exact decimal arithmetic so 0.8 of 450 rows
    is 360, not 361 from float round-up.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must be in (0, 1)")
    n = ds.n_rows
    if n < 5:
        raise ValidationError(f"dataset {ds.ticker}: need at least 5 rows, have {n}")
    n_train = math.ceil(Fraction(str(train_fraction)) * n)
    if n_train <= 0 or n_train >= n:
        raise InvalidSplitError(
            f"dataset {ds.ticker}: split {n_train}/{n - n_train} leaves a part empty"
        )

    def part(lo: int, hi: int) -> LabeledDataset:
        return LabeledDataset(
            ds.ticker,
            ds.dates[lo:hi],
            list(ds.feature_names),
            ds.X[lo:hi].copy(),
            ds.y[lo:hi].copy(),
            dict(ds.column_meta),
        )

    return part(0, n_train), part(n_train, n)


def dataset_csv_text(ds: LabeledDataset) -> str:
    """Serialize a labeled dataset as ``date,y,<feature...>`` CSV."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", "y"] + ds.feature_names)
    for t, day in enumerate(ds.dates):
        row = [day.isoformat(), str(int(ds.y[t]))]
        row.extend(repr(float(v)) for v in ds.X[t])
        writer.writerow(row)
    return out.getvalue()


def read_dataset_csv(content, ticker: str, source: str = "<dataset>") -> LabeledDataset:
    """Read back a ``date,y,<feature...>`` CSV written by dataset_csv_text."""
    from .ingest import parse_company_panel

    panel = parse_company_panel(content, ticker, source=source)
    if "y" not in panel.columns:
        raise ValidationError(f"{source}: missing 'y' column")
    labels = panel.column("y")
    if any(v not in (0.0, 1.0) for v in labels):
        raise ValidationError(f"{source}: 'y' must contain only 0 and 1")
    names = [n for n in panel.feature_names if n != "y"]
    X = np.array([[panel.columns[n][t] for n in names] for t in range(panel.n_rows)],
                 dtype=float).reshape(panel.n_rows, len(names))
    y = np.array([int(v) for v in labels], dtype=int)
    return LabeledDataset(ticker, list(panel.dates), names, X, y, {})
