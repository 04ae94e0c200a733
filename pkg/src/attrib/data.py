"""Panel ingestion, calendar partitioning and synthetic paths.

The canonical panel format is UTF-8 CSV with a ``date`` column followed by
one column per factor::

    date,IR,CS,FX
    2002-12-31,0.0412,0.0105,0.9536

Dates are ISO-8601; numbers use a decimal point and no grouping separators.
Rates are decimals. Columns quoted in percent are converted only when named
in ``percent_factors``.
"""

from __future__ import annotations

import bisect
import csv
import enum
import io
import re
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .core import DataError, InputError, PartitionSpec, RiskFactorPanel

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class Granularity(str, enum.Enum):
    ANNUAL = "annual"
    QUARTERLY = "quarterly"
    MONTHLY = "monthly"
    WEEKLY = "weekly"
    DAILY = "daily"

    @classmethod
    def parse(cls, text: str) -> "Granularity":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise InputError(
                f"unknown granularity {text!r}; expected one of {[g.value for g in cls]}"
            ) from None


GRANULARITY_ORDER = tuple(Granularity)


def _parse_date(text: str, row: int) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"row {row}: cannot parse date {text!r} (ISO-8601 expected)") from None


def _parse_number(text: str, row: int, column: str) -> float | None:
    cell = text.strip()
    if cell == "":
        return None
    if not _NUMBER.match(cell):
        raise DataError(f"row {row}, column {column!r}: cannot parse number {text!r}")
    return float(cell)


def read_panel(
    source: TextIO | str,
    *,
    percent_factors: Iterable[str] = (),
    forward_fill: bool = False,
    date_column: str = "date",
) -> RiskFactorPanel:
    """Read a panel from CSV text.

    Parameters
    ----------
    source : text stream or str
        The CSV content (a ``str`` is treated as the content, not a path).
    percent_factors : iterable of str
        Columns quoted in percent; their values are divided by 100.
    forward_fill : bool
        Replace empty cells with the previous row's value. Off by default;
        leading gaps are always an error.

    Rows may come in any order and are sorted by date. Duplicate dates,
    missing values and unparsable cells raise :class:`DataError` naming the
    row and column.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty panel file") from None
    if not header or header[0] != date_column:
        raise DataError(f"first header column must be {date_column!r}, got {header[:1]}")
    factors = header[1:]
    if not factors:
        raise DataError("panel needs at least one factor column")
    try:
        RiskFactorPanel(tuple(factors), (), np.empty((0, len(factors))))
    except InputError as exc:
        raise DataError(f"bad header: {exc}") from None
    percent = set(percent_factors)
    unknown = sorted(percent - set(factors))
    if unknown:
        raise DataError(f"percent units declared for unknown columns {unknown}")

    rows: list[tuple[date, list[float | None], int]] = []
    seen: dict[date, int] = {}
    for lineno, record in enumerate(reader, start=2):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise DataError(f"row {lineno}: expected {len(header)} cells, got {len(record)}")
        d = _parse_date(record[0], lineno)
        if d in seen:
            raise DataError(f"duplicate date {d.isoformat()} (rows {seen[d]} and {lineno})")
        seen[d] = lineno
        rows.append((d, [_parse_number(c, lineno, f) for c, f in zip(record[1:], factors)], lineno))
    rows.sort(key=lambda r: r[0])

    values = np.empty((len(rows), len(factors)))
    for i, (d, cells, lineno) in enumerate(rows):
        for j, v in enumerate(cells):
            if v is None:
                if forward_fill and i > 0:
                    v = values[i - 1, j]
                else:
                    raise DataError(f"row {lineno}, column {factors[j]!r}: missing value on {d}")
            values[i, j] = v
    for j, f in enumerate(factors):
        if f in percent:
            values[:, j] /= 100.0
    try:
        return RiskFactorPanel(tuple(factors), tuple(r[0] for r in rows), values)
    except InputError as exc:
        raise DataError(str(exc)) from None


def write_panel(panel: RiskFactorPanel, sink: TextIO) -> None:
    """Write ``panel`` in the canonical format; values use 17 significant digits."""
    sink.write(",".join(("date", *panel.factors)) + "\n")
    for d, row in zip(panel.dates, panel.values):
        sink.write(",".join((d.isoformat(), *(format(float(v), ".17g") for v in row))) + "\n")


def panel_to_text(panel: RiskFactorPanel) -> str:
    buf = io.StringIO()
    write_panel(panel, buf)
    return buf.getvalue()


# -- calendar ------------------------------------------------------------


def _period_ends(granularity: Granularity, start: date, end: date) -> list[date]:
    """Calendar sub-period end dates in ``(start, end]``."""
    ends: list[date] = []
    if granularity is Granularity.ANNUAL:
        for y in range(start.year, end.year + 1):
            ends.append(date(y, 12, 31))
    elif granularity in (Granularity.QUARTERLY, Granularity.MONTHLY):
        step = 3 if granularity is Granularity.QUARTERLY else 1
        for y in range(start.year, end.year + 1):
            for mth in range(step, 13, step):
                nxt = date(y + 1, 1, 1) if mth == 12 else date(y, mth + 1, 1)
                ends.append(nxt - timedelta(days=1))
    elif granularity is Granularity.WEEKLY:
        # ISO weeks end on Sunday (isoweekday 7)
        d = start + timedelta(days=7 - start.isoweekday())
        while d <= end + timedelta(days=7):
            ends.append(d)
            d += timedelta(days=7)
    return [d for d in ends if start < d <= end]


def _last_on_or_before(dates: Sequence[date], d: date) -> date | None:
    i = bisect.bisect_right(dates, d)
    return dates[i - 1] if i else None


def make_partition(
    panel: RiskFactorPanel,
    period_start: date,
    period_end: date,
    granularity: Granularity | str,
) -> PartitionSpec:
    """Split ``[period_start, period_end]`` into sub-intervals on panel dates.

    Each boundary is the last panel date on or before the corresponding
    calendar date (period start, each sub-period end, period end). Repeated
    boundaries collapse, so a granularity coarser than the period yields a
    single interval. ``DAILY`` uses every panel date in range.
    """
    g = Granularity.parse(granularity) if isinstance(granularity, str) else granularity
    if not period_start < period_end:
        raise InputError(f"empty period: {period_start} to {period_end}")
    dates = panel.dates
    first = _last_on_or_before(dates, period_start)
    last = _last_on_or_before(dates, period_end)
    if first is None:
        raise InputError(f"no panel date on or before period start {period_start}")
    if last is None or last <= first:
        raise InputError(f"no panel observations in ({first}, {period_end}]")
    if g is Granularity.DAILY:
        bounds = [d for d in dates if first <= d <= last]
    else:
        bounds = [first]
        for cal in _period_ends(g, period_start, period_end):
            b = _last_on_or_before(dates, cal)
            if b is not None and b > bounds[-1]:
                bounds.append(b)
        if bounds[-1] != last:
            bounds.append(last)
    return PartitionSpec(tuple(bounds))


def business_years(panel: RiskFactorPanel, first_year: int, last_year: int) -> list[tuple[date, date]]:
    """Reporting periods, one per calendar year, anchored at year-end observations."""
    if first_year > last_year:
        raise InputError(f"first year {first_year} after last year {last_year}")
    if not panel.dates:
        raise InputError("empty panel")
    if panel.dates[-1].year < last_year:
        raise InputError(f"panel ends {panel.dates[-1]}, before business year {last_year}")
    pairs = []
    for y in range(first_year, last_year + 1):
        start = _last_on_or_before(panel.dates, date(y - 1, 12, 31))
        end = _last_on_or_before(panel.dates, date(y, 12, 31))
        if start is None:
            raise InputError(
                f"business year {y} needs an observation on or before {date(y - 1, 12, 31)}; "
                f"panel starts {panel.dates[0]}"
            )
        if not end > start:
            raise InputError(f"no observations inside business year {y}")
        pairs.append((start, end))
    return pairs


# -- synthetic paths -----------------------------------------------------


@dataclass(frozen=True)
class FactorPath:
    """Random-walk parameters for one synthetic factor.

    ``kind="arithmetic"`` adds ``drift + vol * z`` per step (rates, spreads);
    ``kind="geometric"`` multiplies by ``exp(drift + vol * z)`` (FX, equity).
    """

    start: float
    vol: float
    drift: float = 0.0
    kind: str = "arithmetic"

    def __post_init__(self) -> None:
        if self.kind not in ("arithmetic", "geometric"):
            raise InputError(f"unknown walk kind {self.kind!r}")
        if not self.vol >= 0:
            raise InputError(f"volatility must be nonnegative, got {self.vol!r}")
        if self.kind == "geometric" and not self.start > 0:
            raise InputError(f"geometric walk needs a positive start, got {self.start!r}")


# Daily moves loosely in line with 10y USD swap, A-rated spread, USDEUR.
BOND_FACTORS: Mapping[str, FactorPath] = {
    "IR": FactorPath(0.04, 0.0006),
    "CS": FactorPath(0.012, 0.0002),
    "FX": FactorPath(0.90, 0.006, kind="geometric"),
}


def business_days(start: date, count: int) -> list[date]:
    """``count`` weekdays starting at ``start`` (moved forward off a weekend)."""
    out = []
    d = start
    while len(out) < count:
        if d.isoweekday() <= 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def generate_synthetic_panel(
    spec: Mapping[str, FactorPath] = BOND_FACTORS,
    steps: int = 252,
    seed: int = 0,
    start_date: date = date(2002, 12, 31),
) -> RiskFactorPanel:
    """Seeded random-walk panel with ``steps + 1`` weekday observations."""
    if steps < 1:
        raise InputError(f"steps must be at least 1, got {steps}")
    rng = np.random.default_rng(seed)
    names = tuple(spec)
    shocks = rng.standard_normal((steps, len(names)))
    values = np.empty((steps + 1, len(names)))
    for j, name in enumerate(names):
        p = spec[name]
        steps_j = p.drift + p.vol * shocks[:, j]
        if p.kind == "arithmetic":
            values[0, j] = p.start
            values[1:, j] = p.start + np.cumsum(steps_j)
        else:
            values[0, j] = p.start
            values[1:, j] = p.start * np.exp(np.cumsum(steps_j))
    return RiskFactorPanel(names, tuple(business_days(start_date, steps + 1)), values)
