import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from attrib import ConstantMaturityBond, EvaluationError, HedgedForeignEquity, InputError, bond_price, hedged_price

rates = st.floats(-0.05, 0.2, allow_nan=False)
fx = st.floats(0.1, 10.0, allow_nan=False)


def test_bond_examples():
    assert bond_price(0, 0, 1, 10) == 1.0
    assert bond_price(0.03, 0.01, 0.9, 10) == pytest.approx(0.608008, abs=5e-7)
    assert bond_price(0.02, 0.01, 1.0, 10) == pytest.approx(0.744094, abs=5e-7)
    assert bond_price(0.02, 0.01, 1.0, 10) == 1 / 1.03**10


def test_bond_domain_error_names_factors():
    with pytest.raises(EvaluationError, match="IR\\+CS") as exc:
        bond_price(-0.8, -0.3, 1.0)
    assert exc.value.factor == "IR+CS"
    with pytest.raises(InputError):
        ConstantMaturityBond(0)


@given(rates, rates, fx)
def test_bond_linear_in_fx(r, s, x):
    assert bond_price(r, s, 2 * x) == pytest.approx(2 * bond_price(r, s, x), rel=1e-15)


@given(rates, rates, fx, st.floats(1e-4, 0.05))
def test_bond_decreasing_in_rates(r, s, x, h):
    p = bond_price(r, s, x)
    assert bond_price(r + h, s, x) < p
    assert bond_price(r, s + h, x) < p


def test_hedged_examples():
    assert hedged_price(0.95, 880, 0.95, 880) == 0.95 * 880
    assert round(hedged_price(0.95, 880, 0.95, 880), 1) == 836.0
    assert round(hedged_price(0.79, 1110, 0.95, 880), 1) == 1017.7


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(1, 1e5))
def test_hedge_invariance(x, x0, y0):
    # exact, not just within tolerance
    assert hedged_price(x, y0, x0, y0) == x0 * y0


@given(st.floats(0.01, 10), st.floats(1, 1e5), st.floats(0.01, 10), st.floats(1, 1e5))
def test_hedged_matches_literal_formula(x, y, x0, y0):
    literal = x * y + y0 * (x0 - x)
    assert math.isclose(hedged_price(x, y, x0, y0), literal, rel_tol=1e-12, abs_tol=1e-9 * y0 * x0)


def test_hedged_model_validation():
    with pytest.raises(InputError):
        HedgedForeignEquity(0, 880)
    with pytest.raises(InputError):
        HedgedForeignEquity(0.95, -1)
    with pytest.raises(EvaluationError):
        hedged_price(float("inf"), 1, 1, 1)
    m = HedgedForeignEquity(0.95, 880)
    assert m.factor_set == ("FX", "EQ")
    assert m.price({"FX": 0.79, "EQ": 1110.0}) == hedged_price(0.79, 1110.0, 0.95, 880.0)
