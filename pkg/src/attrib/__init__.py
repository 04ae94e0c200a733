"""P&L attribution by one-at-a-time, sequential-updating and Shapley decompositions."""

from .core import (
    AttribError,
    AttributionResult,
    DataError,
    EvaluationError,
    FunctionModel,
    InputError,
    Method,
    PartitionSpec,
    PricingModel,
    Provenance,
    RiskFactorPanel,
    ScenarioVector,
    evaluate,
    make_scenario,
)
from .data import Granularity, business_years, generate_synthetic_panel, make_partition, read_panel, write_panel
from .decomp import (
    asu_static,
    decompose_multiperiod,
    enumerate_orders,
    hedged_contribution_x,
    oat_static,
    shapley_subset,
    su_static,
)
from .models import ConstantMaturityBond, HedgedForeignEquity, bond_price, hedged_price

__version__ = "0.1.0"

__all__ = [
    "AttribError", "AttributionResult", "DataError", "EvaluationError", "FunctionModel",
    "InputError", "Method", "PartitionSpec", "PricingModel", "Provenance", "RiskFactorPanel",
    "ScenarioVector", "evaluate", "make_scenario", "Granularity", "business_years",
    "generate_synthetic_panel", "make_partition", "read_panel", "write_panel", "asu_static",
    "decompose_multiperiod", "enumerate_orders", "hedged_contribution_x", "oat_static",
    "shapley_subset", "su_static", "ConstantMaturityBond", "HedgedForeignEquity",
    "bond_price", "hedged_price",
]  # fmt: skip
