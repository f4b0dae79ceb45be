"""Benchmark parameter families used by the demos and the test suite.

Two reference markets: a single aggregate asset with a wide state box, and a
fleet of 100 small heterogeneous assets.  Both are volatile with the default
bid slope (q = 0.005) and settle down when the slope is made shallower
(q = 0.2 for the single asset, q = 1.5 for the fleet).  The default schedule
steps the base price through five values, twenty periods each.
"""

from __future__ import annotations

from .clearing import SupplyModel
from .der import DerParams
from .generation import BOX_UNIFORM, Const, GenerationSpec, Scale, Uniform, Offset

__all__ = [
    "single_asset_params",
    "single_asset_spec",
    "single_asset_supply",
    "fleet_spec",
    "fleet_supply",
    "step_change_schedule",
]


def single_asset_params(q: float = 0.005) -> DerParams:
    """The aggregate single-asset model (volatile at the default q)."""
    return DerParams(a=0.95, x_lo=2500.0, x_hi=7500.0, d_lo=0.0, d_hi=500.0,
                     q=q, r=-0.1 * 0.95, c=500.0)


def single_asset_spec(q: float = 0.005) -> GenerationSpec:
    """Point-mass generation rules matching :func:`single_asset_params`,
    with a uniform initial state over the box."""
    return GenerationSpec(
        m=1,
        a=Const(0.95),
        x_lo=Const(2500.0),
        x_hi=Const(7500.0),
        d_lo=Const(0.0),
        d_hi=Const(500.0),
        q=Const(q),
        r=Scale("a", -0.1),
        c=Const(500.0),
        x0=BOX_UNIFORM,
    )


def single_asset_supply() -> SupplyModel:
    return SupplyModel(beta1=0.04, beta2=20.0)


def fleet_spec(m: int = 100, q: float = 0.005) -> GenerationSpec:
    """Heterogeneous fleet rules: retention a ~ U[0.9, 0.95], state box of
    width 400 centered on a reference level x_ref ~ U[350, 500], power limit
    d_hi ~ U[100, 150], coupling r = -2a and offset c = 2*x_ref."""
    return GenerationSpec(
        m=m,
        a=Uniform(0.9, 0.95),
        x_ref=Uniform(350.0, 500.0),
        x_lo=Offset("x_ref", -200.0),
        x_hi=Offset("x_ref", 200.0),
        d_lo=Const(0.0),
        d_hi=Uniform(100.0, 150.0),
        q=Const(q),
        r=Scale("a", -2.0),
        c=Scale("x_ref", 2.0),
        x0=BOX_UNIFORM,
    )


def fleet_supply() -> SupplyModel:
    return SupplyModel(beta1=0.008, beta2=20.0)


def step_change_schedule() -> tuple[tuple[float, int], ...]:
    """Base price stepped through 20, 40, 10, 30, 20, twenty periods each."""
    return ((20.0, 20), (40.0, 20), (10.0, 20), (30.0, 20), (20.0, 20))
