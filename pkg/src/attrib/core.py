"""Domain types shared by the attribution engine.

Factors are identified by name everywhere. Panels and pricing models are
joined on those names, never on column position.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import date
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

FactorId = str


class AttribError(Exception):
    """Base class for all engine errors."""


class InputError(AttribError, ValueError):
    """Malformed or inconsistent input (unknown date, bad order, ...)."""


class DataError(AttribError, ValueError):
    """Raised while ingesting or validating market data."""


class EvaluationError(AttribError, ArithmeticError):
    """A pricing model was evaluated outside its domain."""

    def __init__(self, message: str, factor: str | None = None, value: float | None = None):
        super().__init__(message)
        self.factor = factor
        self.value = value


class Method(str, enum.Enum):
    OAT = "OAT"
    SU = "SU"
    ASU = "ASU"


class Provenance(str, enum.Enum):
    START = "START"
    END = "END"


def _check_factor_names(names: Sequence[str]) -> tuple[str, ...]:
    names = tuple(names)
    for name in names:
        if not isinstance(name, str) or not name:
            raise InputError(f"factor names must be non-empty strings, got {name!r}")
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise InputError(f"duplicate factor names: {dupes}")
    return names


@dataclass(frozen=True)
class RiskFactorPanel:
    """Dated matrix of risk-factor observations.

    Attributes
    ----------
    factors : tuple of str
        Column names, one per factor.
    dates : tuple of date
        Strictly increasing observation dates, one per row.
    values : numpy.ndarray
        Read-only float64 array of shape ``(len(dates), len(factors))``.
    """

    factors: tuple[str, ...]
    dates: tuple[date, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        factors = _check_factor_names(self.factors)
        dates = tuple(self.dates)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape != (len(dates), len(factors)):
            raise DataError(
                f"values shape {values.shape} does not match "
                f"{len(dates)} dates x {len(factors)} factors"
            )
        for prev, cur in zip(dates, dates[1:]):
            if not cur > prev:
                raise DataError(f"dates must be strictly increasing: {prev} then {cur}")
        if not np.isfinite(values).all():
            row, col = map(int, np.argwhere(~np.isfinite(values))[0])
            raise DataError(f"non-finite value at {dates[row]} for factor {factors[col]!r}")
        values.setflags(write=False)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_row", {d: i for i, d in enumerate(dates)})
        object.__setattr__(self, "_col", {f: j for j, f in enumerate(factors)})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RiskFactorPanel):
            return NotImplemented
        return (
            self.factors == other.factors
            and self.dates == other.dates
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    def row_index(self, d: date) -> int:
        try:
            return self._row[d]  # type: ignore[attr-defined]
        except KeyError:
            raise InputError(f"date {d.isoformat()} is not in the panel") from None

    def column_index(self, factor: str) -> int:
        try:
            return self._col[factor]  # type: ignore[attr-defined]
        except KeyError:
            raise InputError(f"factor {factor!r} is not in the panel") from None

    def has_date(self, d: date) -> bool:
        return d in self._row  # type: ignore[attr-defined]

    def row(self, d: date) -> dict[str, float]:
        """Return the observation at ``d`` as a name -> value mapping."""
        i = self.row_index(d)
        return {f: float(self.values[i, j]) for j, f in enumerate(self.factors)}

    def select(self, factors: Iterable[str]) -> "RiskFactorPanel":
        """Sub-panel with the given columns, in the given order."""
        factors = tuple(factors)
        cols = [self.column_index(f) for f in factors]
        return RiskFactorPanel(factors, self.dates, self.values[:, cols])

    def rename(self, mapping: Mapping[str, str]) -> "RiskFactorPanel":
        """Rename columns; names absent from ``mapping`` are kept."""
        return RiskFactorPanel(
            tuple(mapping.get(f, f) for f in self.factors), self.dates, self.values
        )

    def between(self, start: date, end: date) -> "RiskFactorPanel":
        """Rows with ``start <= date <= end``."""
        idx = [i for i, d in enumerate(self.dates) if start <= d <= end]
        return RiskFactorPanel(self.factors, tuple(self.dates[i] for i in idx), self.values[idx])


@dataclass(frozen=True)
class ScenarioVector:
    """One value per factor, each taken from the start or the end of an interval."""

    values: Mapping[str, float]
    provenance: Mapping[str, Provenance]

    def __post_init__(self) -> None:
        if set(self.values) != set(self.provenance):
            raise InputError("values and provenance must cover the same factors")
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    @property
    def factors(self) -> tuple[str, ...]:
        return tuple(self.values)

    def end_set(self) -> frozenset[str]:
        return frozenset(f for f, p in self.provenance.items() if p is Provenance.END)


class PricingModel:
    """Deterministic map from named factor values to a price.

    Subclasses set ``factor_set`` and implement :meth:`price`. Implementations
    must be pure: same input, bit-identical output, no shared mutable state.
    """

    factor_set: tuple[str, ...] = ()

    def price(self, values: Mapping[str, float]) -> float:
        raise NotImplementedError

    def __call__(self, values: Mapping[str, float]) -> float:
        return self.price(values)


class FunctionModel(PricingModel):
    """Wrap a plain callable taking a name -> value mapping.

    Handy for ad hoc instruments and test games::

        FunctionModel(("A", "B"), lambda v: v["A"] * v["B"])
    """

    def __init__(self, factor_set: Sequence[str], fn, name: str = "function"):
        self.factor_set = _check_factor_names(factor_set)
        self._fn = fn
        self.name = name

    def price(self, values: Mapping[str, float]) -> float:
        return float(self._fn(values))

    def __repr__(self) -> str:
        return f"FunctionModel({self.factor_set!r}, name={self.name!r})"


@dataclass(frozen=True)
class PartitionSpec:
    """Sub-interval boundaries ``t_0 < t_1 < ... < t_m`` of a reporting period."""

    boundaries: tuple[date, ...]

    def __post_init__(self) -> None:
        b = tuple(self.boundaries)
        if len(b) < 2:
            raise InputError("a partition needs at least two boundaries")
        for prev, cur in zip(b, b[1:]):
            if not cur > prev:
                raise InputError(f"partition boundaries must increase: {prev} then {cur}")
        object.__setattr__(self, "boundaries", b)

    @property
    def m(self) -> int:
        return len(self.boundaries) - 1

    @property
    def start(self) -> date:
        return self.boundaries[0]

    @property
    def end(self) -> date:
        return self.boundaries[-1]

    def intervals(self) -> list[tuple[date, date]]:
        return list(zip(self.boundaries, self.boundaries[1:]))


@dataclass(frozen=True)
class AttributionResult:
    """Per-factor contributions of one decomposition.

    ``unexplained`` is exactly ``0.0`` for SU and ASU. ``permutation`` is set
    only for SU.
    """

    method: Method
    contributions: Mapping[str, float]
    delta_p: float
    unexplained: float
    partition: PartitionSpec
    permutation: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        method = Method(self.method)
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "contributions", MappingProxyType(dict(self.contributions)))
        if (method is Method.SU) != (self.permutation is not None):
            raise InputError("permutation must be given for SU results and only for them")
        if method is not Method.OAT and self.unexplained != 0.0:
            raise InputError(f"{method.value} results carry no unexplained p&l")
        if self.permutation is not None:
            object.__setattr__(self, "permutation", tuple(self.permutation))

    @property
    def factors(self) -> tuple[str, ...]:
        return tuple(self.contributions)

    @property
    def explained(self) -> float:
        return math.fsum(self.contributions.values())

    def is_consistent(self, rel_tol: float = 1e-12) -> bool:
        """Check that contributions plus residual reproduce ``delta_p``."""
        total = math.fsum([*self.contributions.values(), self.unexplained])
        return math.isclose(total, self.delta_p, rel_tol=rel_tol, abs_tol=1e-300)


def make_scenario(
    panel: RiskFactorPanel,
    start_date: date,
    end_date: date,
    end_set: Iterable[str],
    factors: Sequence[str] | None = None,
) -> ScenarioVector:
    """Mix start- and end-date observations.

    Factors in ``end_set`` take their value at ``end_date``, all others at
    ``start_date``. ``factors`` restricts the vector to a subset of the panel's
    columns (default: all of them).
    """
    i0 = panel.row_index(start_date)
    i1 = panel.row_index(end_date)
    factors = panel.factors if factors is None else tuple(factors)
    cols = {f: panel.column_index(f) for f in factors}
    end_set = frozenset(end_set)
    unknown = sorted(end_set - set(factors))
    if unknown:
        raise InputError(f"unknown factor(s) in end set: {unknown}")
    values = {}
    prov = {}
    for f in factors:
        if f in end_set:
            values[f] = float(panel.values[i1, cols[f]])
            prov[f] = Provenance.END
        else:
            values[f] = float(panel.values[i0, cols[f]])
            prov[f] = Provenance.START
    return ScenarioVector(values, prov)


def evaluate(model: PricingModel, scenario: ScenarioVector | Mapping[str, float]) -> float:
    """Price ``model`` at a scenario; only the model's own factors are passed on."""
    values = scenario.values if isinstance(scenario, ScenarioVector) else scenario
    missing = [f for f in model.factor_set if f not in values]
    if missing:
        raise InputError(f"scenario does not cover model factors {missing}")
    return model.price({f: values[f] for f in model.factor_set})
