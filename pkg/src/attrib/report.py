"""Diagnostic statistics and CSV report emission."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .core import AttributionResult, InputError, Method
from .data import GRANULARITY_ORDER, Granularity

ASU_CHECK = "ASU-check"
_METHOD_RANK = {"OAT": 0, "SU": 1, "ASU": 2, ASU_CHECK: 3}
_GRAN_RANK = {g.value: i for i, g in enumerate(GRANULARITY_ORDER)}


def permutation_range(results: Sequence[AttributionResult], factor: str) -> float:
    """Spread (max - min) of ``factor``'s contribution across all SU orders."""
    if not results:
        raise InputError("no results given")
    if any(r.method is not Method.SU for r in results):
        raise InputError("permutation range needs SU results only")
    factors = set(results[0].factors)
    if any(set(r.factors) != factors for r in results):
        raise InputError("results cover different factor sets")
    if factor not in factors:
        raise InputError(f"unknown factor {factor!r}")
    perms = {r.permutation for r in results}
    if len(perms) != len(results) or len(perms) != math.factorial(len(factors)):
        raise InputError(
            f"expected one result per update order ({math.factorial(len(factors))}), "
            f"got {len(results)} results with {len(perms)} distinct orders"
        )
    values = [r.contributions[factor] for r in results]
    return max(values) - min(values)


def mean_abs_unexplained(results: Sequence[AttributionResult]) -> float:
    """Mean absolute unexplained p&l of OAT results."""
    if not results:
        raise InputError("no results given")
    if any(r.method is not Method.OAT for r in results):
        raise InputError("mean unexplained p&l is defined for OAT results only")
    return math.fsum(abs(r.unexplained) for r in results) / len(results)


def granularity_sensitivity(
    results: Mapping[Granularity | str, AttributionResult], factor: str
) -> float:
    """Spread of ``factor``'s ASU contribution across all five granularities."""
    by_gran = {Granularity.parse(g) if isinstance(g, str) else g: r for g, r in results.items()}
    missing = [g.value for g in GRANULARITY_ORDER if g not in by_gran]
    if missing:
        raise InputError(f"missing granularities: {missing}")
    if any(r.method is not Method.ASU for r in by_gran.values()):
        raise InputError("granularity sensitivity needs ASU results")
    values = [by_gran[g].contributions[factor] for g in GRANULARITY_ORDER]
    return max(values) - min(values)


# -- tables ------------------------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    year: int
    method: str
    order: str
    granularity: str
    contributions: Mapping[str, float]
    unexplained: float
    delta_p: float

    def sort_key(self):
        return (
            self.year,
            _METHOD_RANK.get(self.method, 99),
            self.method,
            _GRAN_RANK.get(self.granularity, 99),
            self.granularity,
            self.order,
        )


def order_label(order: Sequence[str] | None) -> str:
    return "" if order is None else ">".join(order)


@dataclass
class YearlyAttributionTable:
    """Attribution results keyed by (year, method, order, granularity).

    Values are stored in model units (per unit nominal) and scaled to
    percentage points of nominal on emission.
    """

    factors: tuple[str, ...]
    nominal: float = 1.0
    rows: list[TableRow] = field(default_factory=list)

    def add(
        self,
        year: int,
        granularity: Granularity | str,
        result: AttributionResult,
        method_label: str | None = None,
    ) -> TableRow:
        g = granularity.value if isinstance(granularity, Granularity) else str(granularity)
        row = TableRow(
            year=int(year),
            method=method_label or result.method.value,
            order=order_label(result.permutation),
            granularity=g,
            contributions={f: result.contributions[f] for f in self.factors},
            unexplained=result.unexplained,
            delta_p=result.delta_p,
        )
        self._check(row)
        self.rows.append(row)
        return row

    def _check(self, row: TableRow) -> None:
        s = 100.0 / self.nominal
        total = math.fsum([*(v * s for v in row.contributions.values()), row.unexplained * s])
        if not math.isclose(total, row.delta_p * s, rel_tol=1e-10, abs_tol=1e-300):
            raise InputError(
                f"row {row.year}/{row.method}/{row.order}/{row.granularity} does not add up: "
                f"{total!r} vs {row.delta_p * s!r}"
            )

    def sorted_rows(self) -> list[TableRow]:
        return sorted(self.rows, key=TableRow.sort_key)

    def header(self) -> list[str]:
        return [
            "year", "method", "order", "granularity",
            *(f"{f}_pct" for f in self.factors), "unexplained_pct", "delta_p_pct",
            *self.factors, "unexplained", "delta_p",
        ]  # fmt: skip


def _fmt(v: float) -> str:
    out = f"{v:.6f}"
    return "0.000000" if out == "-0.000000" else out


def emit_table(table: YearlyAttributionTable, sink: TextIO) -> None:
    """Write the table as sorted CSV with six decimals; raw values follow the scaled ones."""
    s = 100.0 / table.nominal
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(table.header())
    for row in table.sorted_rows():
        raw = [row.contributions[f] for f in table.factors]
        w.writerow([
            row.year, row.method, row.order, row.granularity,
            *(_fmt(v * s) for v in raw), _fmt(row.unexplained * s), _fmt(row.delta_p * s),
            *(_fmt(v) for v in raw), _fmt(row.unexplained), _fmt(row.delta_p),
        ])  # fmt: skip


def emit_long(table: YearlyAttributionTable, sink: TextIO) -> None:
    """Plot-ready long format: one line per (row, series)."""
    s = 100.0 / table.nominal
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["year", "method", "order", "granularity", "series", "value_pct"])
    for row in table.sorted_rows():
        series = [*table.factors, "unexplained", "delta_p"]
        vals = [*(row.contributions[f] for f in table.factors), row.unexplained, row.delta_p]
        for name, v in zip(series, vals):
            w.writerow([row.year, row.method, row.order, row.granularity, name, _fmt(v * s)])


def parse_table(source: TextIO | str) -> list[dict[str, str]]:
    """Read back an emitted table as dict rows (values left as text)."""
    if isinstance(source, str):
        source = io.StringIO(source)
    return list(csv.DictReader(source))


def table_to_text(table: YearlyAttributionTable) -> str:
    buf = io.StringIO()
    emit_table(table, buf)
    return buf.getvalue()


DiagnosticRow = tuple[int | str, str, str, str, float]


def diagnostics_rows(rows: Iterable[DiagnosticRow]) -> list[DiagnosticRow]:
    """Sort ``(year, statistic, granularity, factor, value)`` tuples deterministically.

    ``year`` may be ``"all"`` for statistics pooled over years; it sorts last.
    """
    return sorted(rows, key=lambda r: (str(r[0]), r[1], _GRAN_RANK.get(r[2], 99), r[2], r[3]))


def emit_diagnostics(rows: Iterable[DiagnosticRow], sink: TextIO) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["year", "statistic", "granularity", "factor", "value_pct"])
    for year, stat, gran, factor, value in diagnostics_rows(rows):
        w.writerow([year, stat, gran, factor, _fmt(value)])
