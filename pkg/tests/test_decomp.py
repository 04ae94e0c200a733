import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrib import (
    FunctionModel,
    HedgedForeignEquity,
    InputError,
    Method,
    PartitionSpec,
    RiskFactorPanel,
    asu_static,
    decompose_multiperiod,
    enumerate_orders,
    hedged_contribution_x,
    oat_static,
    shapley_subset,
    su_static,
)
from attrib.decomp import IntervalGame, shapley_weights

from conftest import D0, D1, brute_asu, brute_price, random_game_model, rel_close, two_point_panel

# Frozen from brute-force scenario evaluation of x / (1 + r + s)**10 for
# (r, s, x): (0.02, 0.01, 1.0) -> (0.03, 0.01, 1.1); see test_frozen_values_oracle.
IR_BUMP = -0.06852974607092632
FX_BUMP = 0.07440939148967252
IR_AFTER_FX = -0.07538272067801888
FX_AFTER_IR = 0.06755641688257996
DELTA_P = -0.0009733291883463613
ASU_IR = -0.0719562333744726
ASU_FX = 0.07098290418612624

START = {"IR": 0.02, "CS": 0.01, "FX": 1.0}
END = {"IR": 0.03, "CS": 0.01, "FX": 1.1}


def test_frozen_values_oracle(bond):
    assert brute_price(bond, START, END, {"IR"}) - brute_price(bond, START, END, ()) == IR_BUMP
    assert 1 / 1.04**10 - 1 / 1.03**10 == pytest.approx(IR_BUMP, rel=1e-13)
    assert brute_price(bond, START, END, {"FX"}) - brute_price(bond, START, END, ()) == FX_BUMP
    asu = brute_asu(bond, START, END)
    assert asu["IR"] == pytest.approx(ASU_IR, rel=1e-14)
    assert asu["FX"] == pytest.approx(ASU_FX, rel=1e-14)


# -- OAT ---------------------------------------------------------------------


def test_oat_bond(bond, bond_panel):
    r = oat_static(bond, bond_panel, D0, D1)
    assert r.method is Method.OAT
    assert r.contributions["IR"] == pytest.approx(IR_BUMP, rel=1e-12)
    assert r.contributions["FX"] == pytest.approx(FX_BUMP, rel=1e-12)
    assert r.contributions["CS"] == 0.0
    assert r.delta_p == pytest.approx(DELTA_P, rel=1e-12)
    assert r.unexplained == pytest.approx(-0.006853, abs=5e-7)
    assert r.is_consistent()


def test_oat_ir_only_move_has_no_residual(bond):
    panel = two_point_panel(("IR", "CS", "FX"), [0.02, 0.01, 1.0], [0.03, 0.01, 1.0])
    r = oat_static(bond, panel, D0, D1)
    assert r.contributions["IR"] == pytest.approx(-0.068530, abs=5e-7)
    assert r.contributions["CS"] == r.contributions["FX"] == 0.0
    assert r.unexplained == 0.0


def test_degenerate_interval_is_all_zero(bond):
    panel = two_point_panel(("IR", "CS", "FX"), [0.02, 0.01, 1.0], [0.02, 0.01, 1.0])
    for r in (
        oat_static(bond, panel, D0, D1),
        su_static(bond, panel, D0, D1, ("FX", "CS", "IR")),
        asu_static(bond, panel, D0, D1),
    ):
        assert r.delta_p == 0.0 and r.unexplained == 0.0
        assert all(c == 0.0 for c in r.contributions.values())


def test_interval_must_be_ordered(bond, bond_panel):
    with pytest.raises(InputError):
        oat_static(bond, bond_panel, D1, D0)


# -- SU ----------------------------------------------------------------------


def test_su_bond_orders(bond, bond_panel):
    a = su_static(bond, bond_panel, D0, D1, ("IR", "FX", "CS"))
    assert a.permutation == ("IR", "FX", "CS")
    assert a.contributions["IR"] == pytest.approx(IR_BUMP, rel=1e-12)
    assert a.contributions["FX"] == pytest.approx(FX_AFTER_IR, rel=1e-12)
    assert a.contributions["CS"] == 0.0
    b = su_static(bond, bond_panel, D0, D1, ("FX", "IR", "CS"))
    assert b.contributions["FX"] == pytest.approx(FX_BUMP, rel=1e-12)
    assert b.contributions["IR"] == pytest.approx(IR_AFTER_FX, rel=1e-12)
    for r in (a, b):
        assert r.unexplained == 0.0
        assert rel_close(math.fsum(r.contributions.values()), DELTA_P, 1e-12)


def test_su_single_factor_gets_everything():
    m = FunctionModel(("A",), lambda v: v["A"] ** 3)
    panel = two_point_panel(("A",), [1.3], [0.7])
    r = su_static(m, panel, D0, D1, ("A",))
    assert r.contributions["A"] == r.delta_p


@pytest.mark.parametrize("order", [("IR", "FX"), ("IR", "FX", "FX"), ("IR", "CS", "EQ")])
def test_su_rejects_bad_order(bond, bond_panel, order):
    with pytest.raises(InputError, match="not a permutation"):
        su_static(bond, bond_panel, D0, D1, order)


# -- ASU ---------------------------------------------------------------------


@pytest.mark.parametrize("path", ["permutations", "subsets", "auto"])
def test_asu_bond(bond, bond_panel, path):
    r = asu_static(bond, bond_panel, D0, D1, path=path)
    assert r.contributions["IR"] == pytest.approx(ASU_IR, rel=1e-12)
    assert r.contributions["FX"] == pytest.approx(ASU_FX, rel=1e-12)
    assert r.contributions["IR"] == pytest.approx(-0.0719562, abs=5e-8)
    assert r.contributions["FX"] == pytest.approx(0.0709829, abs=5e-8)
    assert r.contributions["CS"] == 0.0
    assert rel_close(math.fsum(r.contributions.values()), r.delta_p, 1e-12)


def test_asu_hedged_example():
    m = HedgedForeignEquity(0.95, 880)
    panel = two_point_panel(("FX", "EQ"), [0.95, 880], [0.79, 1110])
    r = asu_static(m, panel, D0, D1)
    # half of (X1 - X0)(Y1 - Y0) = 0.5 * -0.16 * 230
    assert r.contributions["FX"] == pytest.approx(-18.4, abs=1e-9)
    assert r.contributions["EQ"] == pytest.approx(200.1, abs=1e-9)


def test_asu_subset_path_beyond_cap():
    rng = np.random.default_rng(3)
    m = random_game_model(rng, 5)
    start, end = rng.normal(size=5), rng.normal(size=5)
    panel = two_point_panel(m.factor_set, start, end)
    small_cap = asu_static(m, panel, D0, D1, permutation_cap=4)
    full = asu_static(m, panel, D0, D1, path="permutations")
    for f in m.factor_set:
        assert rel_close(small_cap.contributions[f], full.contributions[f], 1e-9)


def test_asu_unknown_path(bond, bond_panel):
    with pytest.raises(InputError):
        asu_static(bond, bond_panel, D0, D1, path="sampled")


def test_shapley_weights_sum_to_one():
    for d in range(1, 9):
        total = math.fsum(math.comb(d - 1, s) * w for s, w in enumerate(shapley_weights(d)))
        assert total == pytest.approx(1.0, rel=1e-15)


def test_memo_prices_each_scenario_once(bond, bond_panel):
    calls = []

    def price(v):
        calls.append(tuple(sorted(v.items())))
        return bond.price(v)

    m = FunctionModel(bond.factor_set, price)
    game = IntervalGame.from_panel(m, bond_panel, D0, D1)
    from attrib.decomp import asu_game_permutations, asu_game_subsets, oat_game

    asu_game_permutations(game)
    asu_game_subsets(game)
    oat_game(game)
    assert len(calls) == 8 == game.n_evaluated


# -- orders ------------------------------------------------------------------


def test_enumerate_orders():
    assert enumerate_orders(["A"]) == [("A",)]
    orders = enumerate_orders(["IR", "CS", "FX"])
    assert len(orders) == 6
    three_factor_orders = {
        ("CS", "IR", "FX"), ("IR", "CS", "FX"), ("IR", "FX", "CS"),
        ("CS", "FX", "IR"), ("FX", "IR", "CS"), ("FX", "CS", "IR"),
    }  # fmt: skip
    assert set(orders) == three_factor_orders
    assert orders[0] == ("IR", "CS", "FX") and orders[-1] == ("FX", "CS", "IR")
    four = enumerate_orders("ABCD")
    assert len(four) == 24 == len(set(four))
    assert four == sorted(four, key=lambda o: ["ABCD".index(c) for c in o])
    with pytest.raises(InputError):
        enumerate_orders([])


# -- multi-period ------------------------------------------------------------


def _path_panel(model, rng, steps):
    dates = tuple(D0 + timedelta(days=i) for i in range(steps + 1))
    values = np.cumsum(rng.normal(scale=0.2, size=(steps + 1, len(model.factor_set))), axis=0)
    return RiskFactorPanel(model.factor_set, dates, values)


def test_multiperiod_m1_is_bitwise_static(bond, bond_panel):
    part = PartitionSpec((D0, D1))
    assert decompose_multiperiod(bond, bond_panel, part, Method.OAT) == oat_static(bond, bond_panel, D0, D1)
    assert decompose_multiperiod(bond, bond_panel, part, "asu") == asu_static(bond, bond_panel, D0, D1)
    o = ("CS", "FX", "IR")
    assert decompose_multiperiod(bond, bond_panel, part, "su", o) == su_static(bond, bond_panel, D0, D1, o)


def test_multiperiod_constant_path():
    m = random_game_model(np.random.default_rng(1), 3)
    dates = tuple(D0 + timedelta(days=i) for i in range(5))
    panel = RiskFactorPanel(m.factor_set, dates, np.ones((5, 3)))
    for method in ("oat", "asu"):
        r = decompose_multiperiod(m, panel, PartitionSpec(dates), method)
        assert all(c == 0.0 for c in r.contributions.values()) and r.delta_p == 0.0


def test_multiperiod_sums_over_subintervals():
    rng = np.random.default_rng(5)
    m = random_game_model(rng, 3)
    panel = _path_panel(m, rng, 6)
    part = PartitionSpec(panel.dates[::2])
    total = decompose_multiperiod(m, panel, part, "oat")
    pieces = [oat_static(m, panel, a, b) for a, b in part.intervals()]
    for f in m.factor_set:
        assert total.contributions[f] == math.fsum(p.contributions[f] for p in pieces)
    assert total.unexplained == math.fsum(p.unexplained for p in pieces)
    assert total.delta_p == m.price(panel.row(part.end)) - m.price(panel.row(part.start))


def test_multiperiod_argument_checks(bond, bond_panel):
    part = PartitionSpec((D0, D1))
    with pytest.raises(InputError, match="order"):
        decompose_multiperiod(bond, bond_panel, part, "su")
    with pytest.raises(InputError, match="order"):
        decompose_multiperiod(bond, bond_panel, part, "asu", ("IR", "CS", "FX"))
    with pytest.raises(InputError, match="2003-06-30"):
        decompose_multiperiod(bond, bond_panel, PartitionSpec((D0, date(2003, 6, 30), D1)), "oat")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(2, 4))
def test_multiperiod_su_asu_explain_full_horizon(seed, steps, d):
    rng = np.random.default_rng(seed)
    m = random_game_model(rng, d)
    panel = _path_panel(m, rng, steps)
    part = PartitionSpec(panel.dates)
    order = tuple(rng.permutation(m.factor_set))
    for r in (decompose_multiperiod(m, panel, part, "su", order), decompose_multiperiod(m, panel, part, "asu")):
        assert rel_close(math.fsum(r.contributions.values()), r.delta_p, 1e-12)


# -- properties on random games -----------------------------------------------


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_subset_form_matches_permutation_mean(seed, d):
    rng = np.random.default_rng(seed)
    m = random_game_model(rng, d)
    panel = two_point_panel(m.factor_set, rng.normal(size=d), rng.normal(size=d))
    oracle = brute_asu(m, panel.row(D0), panel.row(D1))
    sub = shapley_subset(m, panel, D0, D1)
    for f in m.factor_set:
        assert math.isclose(sub.contributions[f], oracle[f], rel_tol=1e-9, abs_tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_label_invariance(seed, d):
    rng = np.random.default_rng(seed)
    names = [f"F{i}" for i in range(d)]
    m = random_game_model(rng, d, names)
    panel = two_point_panel(names, rng.normal(size=d), rng.normal(size=d))
    base = asu_static(m, panel, D0, D1)
    perm = list(rng.permutation(names))
    m2 = FunctionModel(tuple(perm), m.price)
    r2 = asu_static(m2, panel.select(perm), D0, D1)
    assert {f: r2.contributions[f] for f in names} == dict(base.contributions)


def test_dummy_factor_exact_zero():
    rng = np.random.default_rng(11)
    inner = random_game_model(rng, 3, ["A", "B", "C"])
    m = FunctionModel(("A", "B", "DUMMY", "C"), inner.price)
    panel = two_point_panel(m.factor_set, rng.normal(size=4), rng.normal(size=4) + 5)
    assert oat_static(m, panel, D0, D1).contributions["DUMMY"] == 0.0
    assert asu_static(m, panel, D0, D1).contributions["DUMMY"] == 0.0
    assert shapley_subset(m, panel, D0, D1).contributions["DUMMY"] == 0.0
    for o in enumerate_orders(m.factor_set):
        assert su_static(m, panel, D0, D1, o).contributions["DUMMY"] == 0.0


def test_separable_model_all_methods_agree():
    m = FunctionModel(("A", "B", "C"), lambda v: math.sin(v["A"]) + v["B"] ** 2 + math.exp(v["C"]))
    panel = two_point_panel(m.factor_set, [0.1, -0.4, 0.3], [0.9, 0.2, -0.5])
    oat = oat_static(m, panel, D0, D1)
    assert abs(oat.unexplained) <= 1e-12 * abs(oat.delta_p)
    asu = asu_static(m, panel, D0, D1)
    for o in enumerate_orders(m.factor_set):
        su = su_static(m, panel, D0, D1, o)
        for f in m.factor_set:
            assert rel_close(su.contributions[f], oat.contributions[f], 1e-12)
            assert rel_close(asu.contributions[f], oat.contributions[f], 1e-12)


# -- hedged portfolio ------------------------------------------------------------


def test_hedged_contribution_example1():
    first, second, asu = hedged_contribution_x(HedgedForeignEquity(0.95, 880), 0.95, 0.79, 880, 1110)
    assert first == 0.0
    assert second == pytest.approx(-36.8, abs=1e-9)
    assert asu == pytest.approx(-18.4, abs=1e-9)


def test_hedged_contribution_x_unchanged():
    assert hedged_contribution_x(HedgedForeignEquity(0.95, 880), 0.95, 0.95, 880, 1110) == (0.0, 0.0, 0.0)


@given(st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(100, 5000), st.floats(100, 5000))
def test_hedged_identity(x0, x1, y0, y1):
    first, second, asu = hedged_contribution_x(HedgedForeignEquity(x0, y0), x0, x1, y0, y1)
    assert first == 0.0
    assert asu == second / 2


def test_hedged_precondition(bond):
    unhedged = FunctionModel(("X", "Y"), lambda v: v["X"] * v["Y"])
    with pytest.raises(InputError, match="not hedged"):
        hedged_contribution_x(unhedged, 1.0, 1.1, 2.0, 3.0)
    with pytest.raises(InputError, match="two-factor"):
        hedged_contribution_x(bond, 1.0, 1.1, 2.0, 3.0)
