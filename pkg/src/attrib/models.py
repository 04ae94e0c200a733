"""Pricing models: a constant-maturity zero bond and an FX-hedged foreign equity.

Rates and spreads are absolute decimals (0.03 means 3%). Exchange rates are
quoted domestic-per-foreign, e.g. EUR per USD for a European investor.
"""

from __future__ import annotations

import math
from typing import Mapping

from .core import EvaluationError, InputError, PricingModel


def bond_price(r: float, s: float, x: float, maturity: float = 10.0) -> float:
    """Price per unit nominal, in domestic currency, of a constant-maturity bond.

    ``x / (1 + r + s) ** maturity`` with annual compounding.
    """
    base = 1.0 + r + s
    if not base > 0.0:
        raise EvaluationError(
            f"IR+CS out of domain: 1 + {r!r} + {s!r} = {base!r} must be positive",
            factor="IR+CS",
            value=r + s,
        )
    if not math.isfinite(x):
        raise EvaluationError(f"FX must be finite, got {x!r}", factor="FX", value=x)
    return x / base**maturity


def hedged_price(x: float, y: float, x0: float, y0: float) -> float:
    """Long ``y`` index points in foreign currency, short ``y0`` FX forwards struck at ``x0``."""
    for name, v in (("FX", x), ("EQ", y), ("x0", x0), ("y0", y0)):
        if not math.isfinite(v):
            raise EvaluationError(f"{name} must be finite, got {v!r}", factor=name, value=v)
    # Same as x*y + y0*(x0 - x); this grouping makes P(x, y0) == x0*y0 exactly.
    return x * (y - y0) + x0 * y0


class ConstantMaturityBond(PricingModel):
    """Bond whose residual maturity is reset to ``maturity`` years on every date."""

    def __init__(self, maturity: float = 10.0, factor_set: tuple[str, str, str] = ("IR", "CS", "FX")):
        if not (math.isfinite(maturity) and maturity > 0):
            raise InputError(f"maturity must be positive, got {maturity!r}")
        self.maturity = float(maturity)
        self.factor_set = tuple(factor_set)

    def price(self, values: Mapping[str, float]) -> float:
        ir, cs, fx = self.factor_set
        return bond_price(values[ir], values[cs], values[fx], self.maturity)

    def __repr__(self) -> str:
        return f"ConstantMaturityBond(maturity={self.maturity!r})"


class HedgedForeignEquity(PricingModel):
    """Foreign equity position with a static FX forward hedge.

    Holding the index fixed at ``y0``, the portfolio is insensitive to the
    exchange rate; jointly with index moves it is not.
    """

    def __init__(self, x0: float, y0: float, factor_set: tuple[str, str] = ("FX", "EQ")):
        if not (math.isfinite(x0) and x0 > 0):
            raise InputError(f"x0 must be positive, got {x0!r}")
        if not (math.isfinite(y0) and y0 > 0):
            raise InputError(f"y0 must be positive, got {y0!r}")
        self.x0 = float(x0)
        self.y0 = float(y0)
        self.factor_set = tuple(factor_set)

    def price(self, values: Mapping[str, float]) -> float:
        fx, eq = self.factor_set
        return hedged_price(values[fx], values[eq], self.x0, self.y0)

    def __repr__(self) -> str:
        return f"HedgedForeignEquity(x0={self.x0!r}, y0={self.y0!r})"
