"""Per-asset models: scalar energy dynamics, feasible consumption sets,
controllability margins, and the out-of-range fallback policy.

Each asset is a controllable load or storage with one energy state x that
evolves as ``x+ = a*x + d`` under a consumption decision d, with the state
confined to a box ``[x_lo, x_hi]`` and the consumption to ``[d_lo, d_hi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ParameterError, StateInsideBoxError, StateOutsideBoxError

__all__ = [
    "DerParams",
    "FeasibleInput",
    "MarketState",
    "ControllabilityCheck",
    "feasible_input_set",
    "step",
    "check_controllability",
    "fallback_policy",
    "validate_population",
]


@dataclass(frozen=True)
class DerParams:
    """Constants of one asset.

    a:    per-period energy retention factor, 0 < a <= 1 (a = 1 is lossless
          storage, a < 1 a dissipative load such as an HVAC).
    x_lo, x_hi: energy state box.
    d_lo, d_hi: per-period consumption limits.
    q:    curvature of the quadratic consumption utility, q > 0.  1/q is the
          slope of the linear region of the asset's demand curve.
    r:    coupling coefficient between stored energy and marginal utility.
    c:    constant marginal-utility offset.
    """

    a: float
    x_lo: float
    x_hi: float
    d_lo: float
    d_hi: float
    q: float
    r: float
    c: float

    def __post_init__(self):
        if not (0.0 < self.a <= 1.0):
            raise ParameterError(f"retention factor must satisfy 0 < a <= 1, got a={self.a}")
        if not self.x_lo < self.x_hi:
            raise ParameterError(f"state box requires x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]")
        if not self.d_lo < self.d_hi:
            raise ParameterError(f"input box requires d_lo < d_hi, got [{self.d_lo}, {self.d_hi}]")
        if not self.q > 0.0:
            raise ParameterError(f"utility curvature must satisfy q > 0, got q={self.q}")
        for name in ("a", "x_lo", "x_hi", "d_lo", "d_hi", "q", "r", "c"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"parameter {name} must be finite")

    def contains(self, x: float) -> bool:
        """True when the state is inside the (closed) box."""
        return self.x_lo <= x <= self.x_hi


@dataclass(frozen=True)
class FeasibleInput:
    """Interval of consumptions that keep the next state inside the box
    while respecting the power limits: ``(X - a*x) ∩ D``."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ParameterError(f"empty feasible input interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def clamp(self, d: float) -> float:
        return min(max(d, self.lo), self.hi)


class ControllabilityCheck(NamedTuple):
    """Result of the two strict controllability inequalities.

    Both margins are > 0 exactly when ``ok`` is True.
    """

    ok: bool
    margins: tuple[float, float]


@dataclass(frozen=True)
class MarketState:
    """Vector of per-asset energy states at one market period."""

    x: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=float)
        if arr.ndim != 1:
            raise ParameterError("state must be a 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("state entries must be finite")
        object.__setattr__(self, "x", arr)

    def __len__(self) -> int:
        return self.x.shape[0]

    def in_box(self, population: Sequence[DerParams]) -> np.ndarray:
        """Boolean flag per asset: state inside its (closed) box."""
        lo = np.array([p.x_lo for p in population])
        hi = np.array([p.x_hi for p in population])
        return (self.x >= lo) & (self.x <= hi)


def feasible_input_set(p: DerParams, x: float) -> FeasibleInput:
    """Feasible consumption interval at state x.

    Raises StateOutsideBoxError when x is outside the box; those states are
    served by :func:`fallback_policy`, not by the market.  Non-emptiness for
    in-box states is guaranteed by the controllability condition.
    """
    if not p.contains(x):
        raise StateOutsideBoxError(
            f"state {x} outside box [{p.x_lo}, {p.x_hi}]; apply fallback_policy instead"
        )
    return FeasibleInput(max(p.d_lo, p.x_lo - p.a * x), min(p.d_hi, p.x_hi - p.a * x))


def step(p: DerParams, x: float, d: float) -> float:
    """One step of the raw dynamics, ``a*x + d`` (no constraint checking)."""
    return p.a * x + d


def check_controllability(p: DerParams) -> ControllabilityCheck:
    """Check that the asset can be steered into its box from either edge.

    The two margins are ``a*x_lo + d_hi - x_lo`` (can charge up from the
    bottom edge) and ``x_hi - a*x_hi - d_lo`` (can draw down from the top
    edge); both must be strictly positive.
    """
    m1 = p.a * p.x_lo + p.d_hi - p.x_lo
    m2 = p.x_hi - p.a * p.x_hi - p.d_lo
    return ControllabilityCheck(m1 > 0.0 and m2 > 0.0, (m1, m2))


def fallback_policy(p: DerParams, x: float) -> float:
    """Consumption applied while the state is outside the box: full power
    below the box, zero/minimum power above it.  States inside the box are a
    contract violation; they must receive the market allocation."""
    if x < p.x_lo:
        return p.d_hi
    if x > p.x_hi:
        return p.d_lo
    raise StateInsideBoxError(
        f"state {x} lies inside [{p.x_lo}, {p.x_hi}]; use the market allocation"
    )


def validate_population(population: Sequence[DerParams]) -> None:
    """Reject a population if it is empty or any asset is uncontrollable.

    Fail-fast at construction keeps experiments reproducible: a single bad
    asset rejects the whole population instead of being silently dropped.
    """
    if len(population) == 0:
        raise ParameterError("population must contain at least one asset")
    for i, p in enumerate(population):
        ok, margins = check_controllability(p)
        if not ok:
            raise ParameterError(
                f"asset {i} fails controllability: margins {margins} must both be > 0"
            )
