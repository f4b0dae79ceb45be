"""Market clearing at the competitive equilibrium.

The clearing price is the unique root of ``aggregate_demand(lam) -
supply(lam)``: demand is nonincreasing and supply strictly increasing, so the
excess is strictly decreasing and a bracketed bisection converges globally.
The initial bracket ``[beta2 + beta1*sum(lo), beta2 + beta1*sum(hi)]`` is
valid by construction: at its low end supply equals the summed lower
saturation levels, which every bid dominates, and symmetrically at the high
end.  A doubling expansion is retained purely as a guard against
corrupted curves.

The same allocation can be obtained as the solution of a coupled
box-constrained QP (total utility minus supply cost, with supply eliminated
through the balance constraint).  That route is kept here as an independent
verification oracle: a projected-gradient solve of the QP, plus the O(m)
rank-one (Sherman-Morrison) formula for the unconstrained maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bidding import BidCurve
from .der import DerParams
from .errors import MarketClearingError, OracleConvergenceError, ParameterError

__all__ = [
    "SupplyModel",
    "ClearingOutcome",
    "CoupledQp",
    "supply_at",
    "clear_market",
    "kkt_residual",
    "unconstrained_maximizer",
    "qp_oracle",
    "default_price_tol",
]

#: Cap on problem size for the dense/iterative verification oracle.
ORACLE_SIZE_CAP = 50

#: Iteration cap for the projected-gradient oracle.
ORACLE_MAX_ITERS = 10**6


@dataclass(frozen=True)
class SupplyModel:
    """Quadratic supply cost ``c(s) = beta1/2 * s^2 + beta2 * s``.

    The marginal cost ``lam = beta1*s + beta2`` is the supply curve; beta2 is
    the base price (marginal cost of the first unit) and must be positive,
    beta1 the slope of the marginal cost.
    """

    beta1: float
    beta2: float

    def __post_init__(self):
        if not self.beta1 > 0.0:
            raise ParameterError(f"supply curvature must satisfy beta1 > 0, got {self.beta1}")
        if not self.beta2 > 0.0:
            raise ParameterError(f"base price must satisfy beta2 > 0, got {self.beta2}")


@dataclass(frozen=True)
class ClearingOutcome:
    """Competitive equilibrium of one market period.

    lambda_star:  clearing price.
    d_star:       per-asset allocation, each inside its feasible interval.
    s_star:       cleared supply, ``(lambda_star - beta2) / beta1``.
    gap:          balance residual ``|sum(d_star) - s_star|``.
    kkt_residual: worst stationarity/complementarity violation.
    iterations:   bisection iterations used.
    """

    lambda_star: float
    d_star: np.ndarray
    s_star: float
    gap: float
    kkt_residual: float
    iterations: int


def default_price_tol(sm: SupplyModel) -> float:
    """Default bisection bracket-width tolerance, relative to the base price."""
    return 1e-10 * max(1.0, abs(sm.beta2))


def supply_at(sm: SupplyModel, lam: float) -> float:
    """Profit-maximizing supply at price lam (inverse marginal cost),
    strictly increasing in lam."""
    return (lam - sm.beta2) / sm.beta1


def _curve_arrays(curves: Sequence[BidCurve]):
    w = np.array([c.intercept for c in curves])
    q = np.array([c.params.q for c in curves])
    lo = np.array([c.feasible.lo for c in curves])
    hi = np.array([c.feasible.hi for c in curves])
    return w, q, lo, hi


def clear_market(
    curves: Sequence[BidCurve], sm: SupplyModel, tol: float | None = None
) -> ClearingOutcome:
    """Clear the market over the submitted bid curves.

    Bisection narrows the price bracket to width <= tol, the allocation is
    then re-evaluated at the final price, so the demand/supply gap is bounded
    by ``(sum(1/q_i) + 1/beta1) * tol``.

    Raises MarketClearingError if no sign change can be bracketed even after
    expansion (impossible for curves built by this package; it signals
    corrupted inputs).
    """
    if len(curves) == 0:
        raise ParameterError("cannot clear a market with no participants")
    if tol is None:
        tol = default_price_tol(sm)
    if not tol > 0.0:
        raise ParameterError(f"tolerance must be > 0, got {tol}")

    w, q, lo, hi = _curve_arrays(curves)

    def excess(lam: float) -> float:
        demand = float(np.sum(np.clip((w - lam) / q, lo, hi)))
        return demand - supply_at(sm, lam)

    lam_lo = sm.beta2 + sm.beta1 * float(np.sum(lo))
    lam_hi = sm.beta2 + sm.beta1 * float(np.sum(hi))

    iterations = 0
    if lam_hi - lam_lo > tol:
        # Guard expansion; mathematically the initial bracket already holds.
        width = lam_hi - lam_lo
        for _ in range(64):
            if excess(lam_lo) >= 0.0:
                break
            lam_lo -= width
            width *= 2.0
        else:
            raise MarketClearingError("no lower bracket for the clearing price")
        width = lam_hi - lam_lo
        for _ in range(64):
            if excess(lam_hi) <= 0.0:
                break
            lam_hi += width
            width *= 2.0
        else:
            raise MarketClearingError("no upper bracket for the clearing price")

        while lam_hi - lam_lo > tol:
            mid = 0.5 * (lam_lo + lam_hi)
            if mid <= lam_lo or mid >= lam_hi:  # bracket at floating-point resolution
                break
            if excess(mid) > 0.0:
                lam_lo = mid
            else:
                lam_hi = mid
            iterations += 1

    lambda_star = 0.5 * (lam_lo + lam_hi)
    d_star = np.clip((w - lambda_star) / q, lo, hi)
    s_star = supply_at(sm, lambda_star)
    gap = abs(float(np.sum(d_star)) - s_star)
    outcome = ClearingOutcome(lambda_star, d_star, s_star, gap, 0.0, iterations)
    return ClearingOutcome(
        lambda_star, d_star, s_star, gap, kkt_residual(outcome, curves, sm), iterations
    )


def kkt_residual(outcome: ClearingOutcome, curves: Sequence[BidCurve], sm: SupplyModel) -> float:
    """Worst first-order optimality violation of a clearing outcome.

    Per asset: at an interior allocation the marginal utility must equal the
    price; pinned at the upper endpoint it must be >= the price, pinned at
    the lower endpoint <= the price (one-sided violations only).  Degenerate
    single-point intervals carry no stationarity requirement.  The supply
    curve consistency ``|lam - beta1*s - beta2|`` and the balance gap are
    folded into the same maximum.
    """
    w, q, lo, hi = _curve_arrays(curves)
    d = outcome.d_star
    lam = outcome.lambda_star
    marginal_utility = w - q * d

    worst = abs(lam - sm.beta1 * outcome.s_star - sm.beta2)
    worst = max(worst, outcome.gap)
    for i in range(d.shape[0]):
        if hi[i] == lo[i]:
            continue
        if d[i] >= hi[i]:
            viol = max(0.0, lam - marginal_utility[i])
        elif d[i] <= lo[i]:
            viol = max(0.0, marginal_utility[i] - lam)
        else:
            viol = abs(marginal_utility[i] - lam)
        worst = max(worst, viol)
    return worst


@dataclass(frozen=True)
class CoupledQp:
    """Welfare QP data in eliminated form.

    Minimizing ``1/2 d'(Q + beta1*11')d - d'(Rx + c - beta2*1)`` over the box
    is equivalent to the market clearing.  The rank-one coupled matrix is
    never materialized: only q, r, the shifted offsets and beta1 are stored,
    which keeps every operation O(m).
    """

    q: np.ndarray
    r: np.ndarray
    ctilde: np.ndarray  # utility offsets shifted by the base price
    beta1: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        r = np.asarray(self.r, dtype=float)
        ct = np.asarray(self.ctilde, dtype=float)
        if not (q.shape == r.shape == ct.shape) or q.ndim != 1 or q.size == 0:
            raise ParameterError("q, r, ctilde must be 1-D vectors of equal nonzero length")
        if not np.all(q > 0.0):
            raise ParameterError("all utility curvatures must be > 0")
        if not self.beta1 >= 0.0:  # 0 is the fully decoupled limit
            raise ParameterError("beta1 must be >= 0")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "ctilde", ct)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    @classmethod
    def from_population(cls, population: Sequence[DerParams], sm: SupplyModel) -> "CoupledQp":
        return cls(
            q=np.array([p.q for p in population]),
            r=np.array([p.r for p in population]),
            ctilde=np.array([p.c for p in population]) - sm.beta2,
            beta1=sm.beta1,
        )

    def dense_matrix(self) -> np.ndarray:
        """Densified coupled matrix, for small-m verification only."""
        return np.diag(self.q) + self.beta1 * np.ones((self.m, self.m))


def unconstrained_maximizer(qp: CoupledQp, x: np.ndarray) -> np.ndarray:
    """Welfare maximizer ignoring the boxes, via the rank-one update formula.

    Solving ``(Q + beta1*11') dhat = Rx + ctilde`` reduces to one diagonal
    solve plus a scalar correction: with v = Rx + ctilde and w1 = sum(1/q),
    ``dhat = v/q - (beta1 * sum(v/q) / (1 + beta1*w1)) / q``.  O(m); no dense
    inversion.
    """
    x = np.asarray(x, dtype=float)
    v = qp.r * x + qp.ctilde
    v_over_q = v / qp.q
    w1 = float(np.sum(1.0 / qp.q))
    correction = qp.beta1 * float(np.sum(v_over_q)) / (1.0 + qp.beta1 * w1)
    return v_over_q - correction / qp.q


def qp_oracle(
    qp: CoupledQp,
    x: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float = 1e-12,
    max_iters: int = ORACLE_MAX_ITERS,
) -> np.ndarray:
    """Reference allocation by projected-gradient descent on the welfare QP.

    Deliberately independent of the bisection path: fixed step 1/L with
    L = max(q) + beta1*m, started from the box midpoint, run until the
    successive-iterate distance drops below tol.  Capped at m <= 50; it is
    a verification tool, not the production solver.
    """
    if qp.m > ORACLE_SIZE_CAP:
        raise ParameterError(f"oracle supports m <= {ORACLE_SIZE_CAP}, got m={qp.m}")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ParameterError("oracle boxes must be nonempty")
    v = qp.r * np.asarray(x, dtype=float) + qp.ctilde
    lipschitz = float(np.max(qp.q)) + qp.beta1 * qp.m
    d = 0.5 * (lo + hi)
    for _ in range(max_iters):
        grad = qp.q * d + qp.beta1 * float(np.sum(d)) - v
        d_next = np.clip(d - grad / lipschitz, lo, hi)
        shift = float(np.linalg.norm(d_next - d))
        d = d_next
        if shift < tol:
            return d
    raise OracleConvergenceError(
        f"projected gradient did not reach {tol} in {max_iters} iterations"
    )
