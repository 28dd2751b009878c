"""Parsers for the two raw inputs: weekly constituent lists and company panels.

Both inputs are plain UTF-8 CSV.  A constituent file starts with a
``# effective_date=YYYY-MM-DD`` comment line, then a ``ticker`` header,
then one ticker per row.  A panel file has a ``date`` column plus named
numeric columns; an empty cell is a missing value, never zero.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional, Sequence

from .errors import (
    DataValidationError,
    ParseError,
    UnresolvableWeekError,
    ValidationError,
)

# A nominal week is the requested day plus the six days before it, so a
# fallback can never reach into the previous week's snapshot.
MAX_FALLBACK_DAYS = 6

EFFECTIVE_DATE_PREFIX = "# effective_date="


def parse_iso_date(text: str) -> date:
    """Parse a YYYY-MM-DD string, raising ValidationError on anything else."""
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"invalid ISO date {text!r}") from exc


@dataclass(frozen=True)
class MembershipSnapshot:
    """One weekly record of which tickers constitute the index.

    ``requested_date`` is the nominal day of the week (a Friday in normal
    use); ``effective_date`` is the day the data actually comes from,
    at most ``MAX_FALLBACK_DAYS`` earlier.
    """

    requested_date: date
    effective_date: date
    constituents: frozenset[str]

    def __post_init__(self):
        if self.effective_date > self.requested_date:
            raise ValidationError(
                f"effective date {self.effective_date} is after requested "
                f"date {self.requested_date}"
            )
        gap = (self.requested_date - self.effective_date).days
        if gap > MAX_FALLBACK_DAYS:
            raise ValidationError(
                f"effective date {self.effective_date} is {gap} days before "
                f"requested date {self.requested_date} (max {MAX_FALLBACK_DAYS})"
            )
        for ticker in self.constituents:
            if not ticker:
                raise ValidationError("constituent tickers must be non-empty")

    @property
    def week_start(self) -> date:
        return self.requested_date - timedelta(days=MAX_FALLBACK_DAYS)

    def covers(self, day: date) -> bool:
        return self.week_start <= day <= self.requested_date


@dataclass
class CompanyPanel:
    """Per-company, date-ordered rows of named numeric features.

    Stored column-major: ``columns[name][t]`` is the value of ``name`` at
    ``dates[t]``, with ``None`` marking a missing cell.  Rows are strictly
    increasing in date.  Treat instances as immutable; every operation on
    a panel returns a new one.
    """

    ticker: str
    dates: list[date]
    columns: dict[str, list[Optional[float]]] = field(default_factory=dict)

    def __post_init__(self):
        for prev, nxt in zip(self.dates, self.dates[1:]):
            if nxt <= prev:
                raise ValidationError(
                    f"panel {self.ticker}: dates not strictly increasing "
                    f"({prev} then {nxt})"
                )
        for name, values in self.columns.items():
            if len(values) != len(self.dates):
                raise ValidationError(
                    f"panel {self.ticker}: column {name!r} has {len(values)} "
                    f"values for {len(self.dates)} rows"
                )

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    @property
    def feature_names(self) -> list[str]:
        return list(self.columns)

    def column(self, name: str) -> list[Optional[float]]:
        if name not in self.columns:
            raise ValidationError(f"panel {self.ticker}: unknown column {name!r}")
        return self.columns[name]

    def with_columns(self, new: dict[str, list[Optional[float]]]) -> "CompanyPanel":
        """Return a panel with ``new`` columns appended (names must be fresh)."""
        for name in new:
            if name in self.columns:
                raise ValidationError(
                    f"panel {self.ticker}: column {name!r} already exists"
                )
        merged = {name: list(vals) for name, vals in self.columns.items()}
        merged.update({name: list(vals) for name, vals in new.items()})
        return CompanyPanel(self.ticker, list(self.dates), merged)

    def without_columns(self, names: Sequence[str]) -> "CompanyPanel":
        drop = set(names)
        kept = {n: list(v) for n, v in self.columns.items() if n not in drop}
        return CompanyPanel(self.ticker, list(self.dates), kept)

    def slice_rows(self, start: int, stop: int) -> "CompanyPanel":
        return CompanyPanel(
            self.ticker,
            self.dates[start:stop],
            {n: v[start:stop] for n, v in self.columns.items()},
        )


def _as_text(content) -> str:
    if isinstance(content, bytes):
        return content.decode("utf-8")
    if isinstance(content, str):
        return content
    data = content.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def parse_membership_file(
    content, requested_date: date, source: str = "<membership>"
) -> MembershipSnapshot:
    """Parse one weekly constituent file into a MembershipSnapshot.

    Args:
        content: bytes, text, or a readable stream with the file body.
        requested_date: the nominal day this snapshot was requested for.
        source: file name used in error messages.

    Raises:
        ParseError: malformed header or ticker row.
        DataValidationError: empty file, duplicate ticker, or an
            effective date outside the weekly window.
    """
    lines = _as_text(content).splitlines()
    if not lines:
        raise DataValidationError(f"{source}: empty membership file")
    header = lines[0]
    if not header.startswith(EFFECTIVE_DATE_PREFIX):
        raise ParseError(
            f"expected {EFFECTIVE_DATE_PREFIX!r} header", source=source, line=1
        )
    try:
        effective = date.fromisoformat(header[len(EFFECTIVE_DATE_PREFIX):].strip())
    except ValueError:
        raise ParseError("invalid effective date", source=source, line=1) from None
    if len(lines) < 2 or lines[1].strip() != "ticker":
        raise ParseError("expected 'ticker' column header", source=source, line=2)

    tickers: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines[2:], start=3):
        ticker = raw.strip()
        if not ticker or "," in ticker or any(c.isspace() for c in ticker):
            raise ParseError(
                f"malformed ticker row {raw!r}", source=source, line=lineno
            )
        if ticker in seen:
            raise DataValidationError(
                f"{source}, line {lineno}: duplicate ticker {ticker!r}"
            )
        seen.add(ticker)
        tickers.append(ticker)

    try:
        return MembershipSnapshot(requested_date, effective, frozenset(tickers))
    except ValidationError as exc:
        raise DataValidationError(f"{source}: {exc}") from exc


def membership_file_text(snapshot: MembershipSnapshot) -> str:
    """Serialize a snapshot back into the constituent file format.

    A snapshot may legitimately list zero tickers (synthetic churn can
    empty a small index for a week); the header lines still round-trip.
    """
    lines = [f"{EFFECTIVE_DATE_PREFIX}{snapshot.effective_date.isoformat()}", "ticker"]
    lines.extend(sorted(snapshot.constituents))
    return "\n".join(lines) + "\n"


def resolve_weekly_date(requested: date, available: Sequence[date]) -> date:
    """Return the latest available date within the weekly lookback window.

    ``available`` must be sorted ascending.  The result is the largest
    date d with requested - 6 days <= d <= requested.
    """
    if not available:
        raise ValidationError("available dates must be non-empty")
    idx = bisect_right(available, requested) - 1
    if idx < 0 or (requested - available[idx]).days > MAX_FALLBACK_DAYS:
        raise UnresolvableWeekError(
            f"no available date within {MAX_FALLBACK_DAYS} days before {requested}"
        )
    return available[idx]


def parse_company_panel(content, ticker: str, source: str = "<panel>") -> CompanyPanel:
    """Parse a company history CSV into a CompanyPanel.

    Rows are re-sorted ascending by date.  Empty cells become missing
    values.  Raises ParseError with row/column context on malformed
    cells and DataValidationError on duplicate dates.
    """
    reader = csv.reader(io.StringIO(_as_text(content)))
    rows = list(reader)
    if not rows:
        raise DataValidationError(f"{source}: empty panel file")
    header = rows[0]
    if not header or header[0] != "date":
        raise ParseError("first column must be 'date'", source=source, line=1)
    names = header[1:]
    if not names:
        raise ParseError("panel needs at least one feature column", source=source, line=1)
    if len(set(names)) != len(names):
        raise ParseError("duplicate column names in header", source=source, line=1)
    if any(not n for n in names):
        raise ParseError("empty column name in header", source=source, line=1)

    parsed: list[tuple[date, list[Optional[float]]]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, found {len(row)}",
                source=source,
                line=lineno,
            )
        try:
            row_date = date.fromisoformat(row[0])
        except ValueError:
            raise ParseError(
                f"invalid date {row[0]!r}", source=source, line=lineno, column="date"
            ) from None
        values: list[Optional[float]] = []
        for name, cell in zip(names, row[1:]):
            if cell == "":
                values.append(None)
                continue
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                # also catches literal "inf"/"nan" cells, which float() accepts
                raise ParseError(
                    f"non-numeric cell {cell!r}",
                    source=source,
                    line=lineno,
                    column=name,
                )
            values.append(value)
        parsed.append((row_date, values))

    dates_seen = [d for d, _ in parsed]
    if len(set(dates_seen)) != len(dates_seen):
        dupes = sorted({d for d in dates_seen if dates_seen.count(d) > 1})
        raise DataValidationError(
            f"{source}: duplicate dates {[d.isoformat() for d in dupes]}"
        )
    parsed.sort(key=lambda item: item[0])

    columns: dict[str, list[Optional[float]]] = {n: [] for n in names}
    for _, values in parsed:
        for name, value in zip(names, values):
            columns[name].append(value)
    return CompanyPanel(ticker, [d for d, _ in parsed], columns)


def panel_file_text(panel: CompanyPanel) -> str:
    """Serialize a panel back into the panel CSV format (round-trip safe)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date"] + panel.feature_names)
    for t, day in enumerate(panel.dates):
        row = [day.isoformat()]
        for name in panel.feature_names:
            value = panel.columns[name][t]
            row.append("" if value is None else repr(value))
        writer.writerow(row)
    return out.getvalue()
