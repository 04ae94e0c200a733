"""One-at-a-time, sequential-updating and averaged-sequential (Shapley) decompositions.

Every static decomposition on an interval ``[t0, t1]`` only ever prices
scenarios in which each factor sits at either its ``t0`` or its ``t1`` value.
There are ``2**d`` of them; :class:`IntervalGame` prices each at most once,
keyed by the bitmask of factors moved to ``t1``. OAT, every SU order and both
ASU paths draw from the same cache.

Sums are taken with :func:`math.fsum`, which is correctly rounded and thus
independent of summation order.
"""

from __future__ import annotations

import itertools
import math
from datetime import date
from typing import Iterable, Mapping, Sequence

from .core import (
    AttributionResult,
    InputError,
    Method,
    PartitionSpec,
    PricingModel,
    RiskFactorPanel,
    evaluate,
)

DEFAULT_PERMUTATION_CAP = 8

UpdateOrder = tuple[str, ...]


class IntervalGame:
    """Memoized scenario prices for one model on one interval.

    ``value(mask)`` is the price with the factors whose bits are set in
    ``mask`` at their end values and all others at their start values.
    """

    def __init__(
        self,
        model: PricingModel,
        start: Mapping[str, float],
        end: Mapping[str, float],
    ):
        self.model = model
        self.factors: tuple[str, ...] = tuple(model.factor_set)
        self.start = {f: float(start[f]) for f in self.factors}
        self.end = {f: float(end[f]) for f in self.factors}
        self.bit = {f: 1 << j for j, f in enumerate(self.factors)}
        self.full = (1 << len(self.factors)) - 1
        self._cache: dict[int, float] = {}

    @classmethod
    def from_panel(
        cls, model: PricingModel, panel: RiskFactorPanel, t0: date, t1: date
    ) -> "IntervalGame":
        if not t0 < t1:
            raise InputError(f"interval start {t0} must precede end {t1}")
        i0, i1 = panel.row_index(t0), panel.row_index(t1)
        cols = [panel.column_index(f) for f in model.factor_set]
        start = {f: float(panel.values[i0, j]) for f, j in zip(model.factor_set, cols)}
        end = {f: float(panel.values[i1, j]) for f, j in zip(model.factor_set, cols)}
        return cls(model, start, end)

    def value(self, mask: int) -> float:
        try:
            return self._cache[mask]
        except KeyError:
            pass
        scenario = {
            f: (self.end[f] if mask & b else self.start[f]) for f, b in self.bit.items()
        }
        price = evaluate(self.model, scenario)
        self._cache[mask] = price
        return price

    def mask_of(self, factors: Iterable[str]) -> int:
        mask = 0
        for f in factors:
            mask |= self.bit[f]
        return mask

    @property
    def delta_p(self) -> float:
        return self.value(self.full) - self.value(0)

    @property
    def n_evaluated(self) -> int:
        return len(self._cache)


def enumerate_orders(factors: Sequence[str]) -> list[UpdateOrder]:
    """All ``d!`` update orders, lexicographic in the positions of ``factors``."""
    factors = tuple(factors)
    if not factors:
        raise InputError("need at least one factor")
    return list(itertools.permutations(factors))


def check_order(order: Sequence[str], factors: Sequence[str]) -> UpdateOrder:
    order = tuple(order)
    if len(order) != len(factors) or set(order) != set(factors):
        raise InputError(
            f"update order {list(order)} is not a permutation of the factors {list(factors)}"
        )
    return order


def _single(t0: date, t1: date) -> PartitionSpec:
    return PartitionSpec((t0, t1))


# -- games -----------------------------------------------------------------


def oat_game(game: IntervalGame) -> tuple[dict[str, float], float]:
    """Bump each factor alone; return contributions and the unexplained residual."""
    base = game.value(0)
    contrib = {f: game.value(game.bit[f]) - base for f in game.factors}
    unexplained = math.fsum([game.delta_p, *(-c for c in contrib.values())])
    return contrib, unexplained


def su_game(game: IntervalGame, order: Sequence[str]) -> dict[str, float]:
    """Walk ``order``, moving one factor at a time to its end value."""
    order = check_order(order, game.factors)
    contrib = {}
    mask = 0
    prev = game.value(0)
    for f in order:
        mask |= game.bit[f]
        cur = game.value(mask)
        contrib[f] = cur - prev
        prev = cur
    return {f: contrib[f] for f in game.factors}


def asu_game_permutations(game: IntervalGame) -> dict[str, float]:
    """Mean of the SU contributions over every update order."""
    terms: dict[str, list[float]] = {f: [] for f in game.factors}
    n = 0
    for order in enumerate_orders(game.factors):
        for f, c in su_game(game, order).items():
            terms[f].append(c)
        n += 1
    return {f: math.fsum(t) / n for f, t in terms.items()}


def shapley_weights(d: int) -> list[float]:
    """``w[s] = s! (d - s - 1)! / d!`` for coalitions of size ``s`` excluding the player."""
    return [math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) for s in range(d)]


def asu_game_subsets(game: IntervalGame) -> dict[str, float]:
    """Shapley value via weighted marginal contributions over all coalitions."""
    d = len(game.factors)
    weights = shapley_weights(d)
    out = {}
    for f in game.factors:
        fb = game.bit[f]
        terms = []
        for mask in range(game.full + 1):
            if mask & fb:
                continue
            s = bin(mask).count("1")
            terms.append(weights[s] * (game.value(mask | fb) - game.value(mask)))
        out[f] = math.fsum(terms)
    return out


def asu_game(
    game: IntervalGame, path: str = "auto", permutation_cap: int = DEFAULT_PERMUTATION_CAP
) -> dict[str, float]:
    if path == "auto":
        path = "permutations" if len(game.factors) <= permutation_cap else "subsets"
    if path == "permutations":
        return asu_game_permutations(game)
    if path == "subsets":
        return asu_game_subsets(game)
    raise InputError(f"unknown ASU path {path!r}")


# -- static decompositions ---------------------------------------------------


def oat_static(model: PricingModel, panel: RiskFactorPanel, t0: date, t1: date) -> AttributionResult:
    """One-at-a-time decomposition of the p&l between ``t0`` and ``t1``."""
    game = IntervalGame.from_panel(model, panel, t0, t1)
    contrib, unexplained = oat_game(game)
    return AttributionResult(Method.OAT, contrib, game.delta_p, unexplained, _single(t0, t1))


def su_static(
    model: PricingModel,
    panel: RiskFactorPanel,
    t0: date,
    t1: date,
    order: Sequence[str],
) -> AttributionResult:
    """Sequential-updating decomposition for one update order."""
    order = check_order(order, model.factor_set)
    game = IntervalGame.from_panel(model, panel, t0, t1)
    contrib = su_game(game, order)
    return AttributionResult(
        Method.SU, contrib, game.delta_p, 0.0, _single(t0, t1), permutation=order
    )


def asu_static(
    model: PricingModel,
    panel: RiskFactorPanel,
    t0: date,
    t1: date,
    *,
    path: str = "auto",
    permutation_cap: int = DEFAULT_PERMUTATION_CAP,
) -> AttributionResult:
    """Average of all sequential-updating decompositions (the Shapley value).

    Parameters
    ----------
    path : {"auto", "permutations", "subsets"}
        ``"auto"`` walks all ``d!`` orders while ``d <= permutation_cap`` and
        switches to the ``2**d`` coalition form beyond that.
    """
    game = IntervalGame.from_panel(model, panel, t0, t1)
    contrib = asu_game(game, path, permutation_cap)
    return AttributionResult(Method.ASU, contrib, game.delta_p, 0.0, _single(t0, t1))


def shapley_subset(model: PricingModel, panel: RiskFactorPanel, t0: date, t1: date) -> AttributionResult:
    """ASU computed through the coalition-weighted form only."""
    return asu_static(model, panel, t0, t1, path="subsets")


# -- multi-period ------------------------------------------------------------


def decompose_multiperiod(
    model: PricingModel,
    panel: RiskFactorPanel,
    partition: PartitionSpec,
    method: Method | str,
    order: Sequence[str] | None = None,
    *,
    path: str = "auto",
    permutation_cap: int = DEFAULT_PERMUTATION_CAP,
) -> AttributionResult:
    """Apply a static decomposition on each sub-interval and add up per factor."""
    method = Method(method.upper() if isinstance(method, str) else method)
    if method is Method.SU:
        if order is None:
            raise InputError("SU needs an update order")
        order = check_order(order, model.factor_set)
    elif order is not None:
        raise InputError(f"{method.value} does not take an update order")
    missing = [d.isoformat() for d in partition.boundaries if not panel.has_date(d)]
    if missing:
        raise InputError(f"partition boundaries not in panel: {missing}")

    per_factor: dict[str, list[float]] = {f: [] for f in model.factor_set}
    residuals: list[float] = []
    first_game = last_game = None
    for t0, t1 in partition.intervals():
        game = IntervalGame.from_panel(model, panel, t0, t1)
        if first_game is None:
            first_game = game
        last_game = game
        if method is Method.OAT:
            contrib, unexplained = oat_game(game)
            residuals.append(unexplained)
        elif method is Method.SU:
            contrib = su_game(game, order)
        else:
            contrib = asu_game(game, path, permutation_cap)
        for f, c in contrib.items():
            per_factor[f].append(c)

    delta_p = last_game.value(last_game.full) - first_game.value(0)
    totals = {f: math.fsum(v) for f, v in per_factor.items()}
    unexplained = math.fsum(residuals) if method is Method.OAT else 0.0
    return AttributionResult(
        method,
        totals,
        delta_p,
        unexplained,
        partition,
        permutation=order if method is Method.SU else None,
    )


# -- partially hedged two-factor portfolios ----------------------------------


def hedged_contribution_x(
    model: PricingModel, x0: float, x1: float, y0: float, y1: float
) -> tuple[float, float, float]:
    """X-contributions for a two-factor portfolio that is hedged against X alone.

    The model's first factor is X, the second Y. Returns
    ``(oat_or_x_first_su, y_first_su, asu)``. The first is exactly zero for
    such a portfolio; the second is ``P(X1, Y1) - P(X0, Y1)``; the third is
    their average.

    Raises
    ------
    InputError
        If the model does not have two factors or is sensitive to X with Y
        held at its start value.
    """
    if len(model.factor_set) != 2:
        raise InputError("hedged analysis needs a two-factor model (X, Y)")
    fx, fy = model.factor_set
    game = IntervalGame(model, {fx: x0, fy: y0}, {fx: x1, fy: y1})
    p00, p10 = game.value(0), game.value(game.bit[fx])
    if not math.isclose(p10, p00, rel_tol=1e-12, abs_tol=0.0) and p10 != p00:
        raise InputError(
            f"portfolio is not hedged against {fx} alone: P(X1,Y0)={p10!r} != P(X0,Y0)={p00!r}"
        )
    first = oat_game(game)[0][fx]
    x_first = su_game(game, (fx, fy))[fx]
    if first != x_first:  # pragma: no cover - both are the same cached difference
        raise AssertionError("OAT and X-first SU disagree")
    second = su_game(game, (fy, fx))[fx]
    asu = asu_game_permutations(game)[fx]
    return first, second, asu
