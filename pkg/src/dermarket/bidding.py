"""State-dependent bidding functions and the aggregate demand curve.

An asset's demand at price ``lam`` is the payoff maximizer
``clamp((-lam + r*x + c) / q, feasible interval)``: affine and decreasing in
the price between two saturation thresholds, constant outside them.  Bids are
kept in this analytic form (intercept, slope, interval) rather than sampled
into price/quantity tables, so clearing works on exact piecewise-linear
curves with no discretization artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .der import DerParams, FeasibleInput, feasible_input_set
from .errors import ParameterError

__all__ = ["BidCurve", "bid", "thresholds", "aggregate_demand", "make_curve"]


@dataclass(frozen=True)
class BidCurve:
    """One asset's demand curve at a fixed energy state.

    The marginal utility at consumption d is ``(r*x + c) - q*d``; equating it
    with the price and clamping to the feasible interval gives the bid.  The
    state enters only through the intercept ``r*x + c``.
    """

    params: DerParams
    x: float
    feasible: FeasibleInput
    intercept: float = field(init=False)  # marginal utility at d = 0

    def __post_init__(self):
        object.__setattr__(self, "intercept", self.params.r * self.x + self.params.c)

    @property
    def unconstrained_at_zero_price(self) -> float:
        """Demand of the unclamped curve at lam = 0: (r*x + c) / q."""
        return self.intercept / self.params.q


def make_curve(p: DerParams, x: float) -> BidCurve:
    """Build the bid curve for an in-box state (raises otherwise)."""
    return BidCurve(p, x, feasible_input_set(p, x))


def bid(curve: BidCurve, lam: float) -> float:
    """Demand at price lam: nonincreasing, piecewise linear, at most three
    pieces, always inside the feasible interval."""
    return curve.feasible.clamp((curve.intercept - lam) / curve.params.q)


def thresholds(curve: BidCurve) -> tuple[float, float]:
    """Prices at which the bid saturates.

    Returns ``(lam_th_hi, lam_th_lo)``: the bid sits at the interval's upper
    endpoint for lam <= lam_th_hi and at the lower endpoint for
    lam >= lam_th_lo, with lam_th_hi <= lam_th_lo.
    """
    q = curve.params.q
    return (curve.intercept - q * curve.feasible.hi, curve.intercept - q * curve.feasible.lo)


def aggregate_demand(curves: Sequence[BidCurve], lam: float) -> float:
    """Total demand at price lam (sum of the individual bids)."""
    if len(curves) == 0:
        raise ParameterError("aggregate demand of an empty curve list is undefined")
    return sum(bid(c, lam) for c in curves)
