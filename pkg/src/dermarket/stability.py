"""Analytical stability certificates for the market's closed loop.

The closed-loop state map is a contraction whenever each asset's effective
feedback gain has magnitude below one.  For a single asset the gain is
``a + r/(q + beta1)`` and the analysis is exact.  For many assets the coupled
inverse of the welfare problem is replaced by a diagonal surrogate whose
diagonal ``phi_i = 1/q_i - beta1*w2 / (2*(1 + beta1*w1))`` (with
``w_j = sum(q_i^-j)``) approximates it within a spectral-norm error
``eps = beta1*w2 / (2*(1 + beta1*w1))``; the per-asset gains are then
``a_i + phi_i*r_i``.  The bound is tight: the difference between the true
inverse and the surrogate is a scaled rank-one perturbation of the identity
whose extreme eigenvalues are ``+-w2/2``.

A certificate reports the per-asset margins, the all-margins-below-one
verdict, and the contraction factor established by the case analysis of the
certificates' proofs (``max(|margin|, a)`` per asset for negative coupling).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .clearing import CoupledQp, SupplyModel, unconstrained_maximizer
from .der import DerParams
from .errors import MarketModelError, ParameterError, ProjectionIdentityError

__all__ = [
    "Certificate",
    "certify_single",
    "certify_multi",
    "lambda_approx",
    "double_projection",
    "empirical_contraction",
    "single_closed_loop_map",
    "decoupled_closed_loop_map",
]

#: Size up to which the diagonal-surrogate error bound is re-verified densely.
DENSE_CHECK_CAP = 50


@dataclass(frozen=True)
class Certificate:
    """Stability screening result for one market configuration.

    margins:    per-asset effective gains; all must have |margin| < 1.
    certified:  the verdict (sufficient condition only, never necessary).
    worst_index: asset with the largest |margin|.
    phi:        per-asset demand-sensitivity coefficients used in the margins.
    w1, w2:     curvature sums sum(1/q_i), sum(1/q_i^2).
    epsilon:    spectral-norm bound on the decoupling error (0 when the
                analysis is exact, i.e. the single-asset certificate).
    factors:    per-asset contraction factors from the proof's case split.
    contraction_factor: max of factors; a Lipschitz bound for the certified
                map (the true closed loop for one asset, the decoupled
                surrogate loop for several).
    """

    margins: np.ndarray
    certified: bool
    worst_index: int
    phi: np.ndarray
    w1: float
    w2: float
    epsilon: float
    factors: np.ndarray
    contraction_factor: float

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "margins": self.margins.tolist(),
            "worst_index": self.worst_index,
            "phi": self.phi.tolist(),
            "w1": self.w1,
            "w2": self.w2,
            "epsilon": self.epsilon,
            "factors": self.factors.tolist(),
            "contraction_factor": self.contraction_factor,
        }


def _case_factors(a: np.ndarray, r: np.ndarray, margins: np.ndarray) -> np.ndarray:
    # Negative coupling: the proof bounds |T_i(x)-T_i(y)| by max(|margin|, a);
    # nonnegative coupling: by the margin itself.
    return np.where(r < 0.0, np.maximum(np.abs(margins), a), margins)


def certify_single(p: DerParams, sm: SupplyModel) -> Certificate:
    """Exact single-asset certificate: margin ``a + r/(q + beta1)``."""
    phi = 1.0 / (p.q + sm.beta1)
    margin = p.a + phi * p.r
    margins = np.array([margin])
    factors = _case_factors(np.array([p.a]), np.array([p.r]), margins)
    return Certificate(
        margins=margins,
        certified=bool(abs(margin) < 1.0),
        worst_index=0,
        phi=np.array([phi]),
        w1=1.0 / p.q,
        w2=1.0 / p.q**2,
        epsilon=0.0,
        factors=factors,
        contraction_factor=float(factors[0]),
    )


def lambda_approx(q: np.ndarray, beta1: float) -> tuple[np.ndarray, float]:
    """Diagonal surrogate of the coupled inverse and its error bound.

    Returns ``(phi, eps)`` with ``phi_i = 1/q_i - beta1*w2/(2*(1+beta1*w1))``
    and ``eps = beta1*w2/(2*(1+beta1*w1))``.  For small m the spectral norm
    of the true difference is recomputed densely and checked against eps
    (the bound holds with equality, so a violation means broken arithmetic).
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0 or not np.all(q > 0.0):
        raise ParameterError("q must be a nonempty vector of positive curvatures")
    if not beta1 >= 0.0:  # 0 is the fully decoupled limit (phi = 1/q, eps = 0)
        raise ParameterError("beta1 must be >= 0")
    w1 = float(np.sum(1.0 / q))
    w2 = float(np.sum(1.0 / q**2))
    eps = 0.5 * beta1 * w2 / (1.0 + beta1 * w1)
    phi = 1.0 / q - eps

    if q.size <= DENSE_CHECK_CAP:
        m = q.size
        qtilde = np.diag(q) + beta1 * np.ones((m, m))
        diff = np.linalg.inv(qtilde) - np.diag(phi)
        norm = float(np.linalg.norm(diff, 2))
        if norm > eps * (1.0 + 1e-9) + 1e-12:
            raise MarketModelError(
                f"decoupling error {norm} exceeds its bound {eps}; numerical fault"
            )
    return phi, eps


def certify_multi(population: Sequence[DerParams], sm: SupplyModel) -> Certificate:
    """Population certificate from the decoupled surrogate: margins
    ``a_i + phi_i * r_i``, certified when every magnitude is below one."""
    if len(population) == 0:
        raise ParameterError("population must contain at least one asset")
    a = np.array([p.a for p in population])
    r = np.array([p.r for p in population])
    q = np.array([p.q for p in population])
    phi, eps = lambda_approx(q, sm.beta1)
    margins = a + phi * r
    factors = _case_factors(a, r, margins)
    worst = int(np.argmax(np.abs(margins)))
    return Certificate(
        margins=margins,
        certified=bool(np.all(np.abs(margins) < 1.0)),
        worst_index=worst,
        phi=phi,
        w1=float(np.sum(1.0 / q)),
        w2=float(np.sum(1.0 / q**2)),
        epsilon=eps,
        factors=factors,
        contraction_factor=float(np.max(factors)),
    )


def double_projection(
    a: float,
    x_box: tuple[float, float],
    d_box: tuple[float, float],
    x: float,
    d: float,
) -> float:
    """Evaluate both orders of the nested-projection identity and assert
    they agree.

    ``a*x + clamp(d, (X - a*x) ∩ D)  ==  clamp(a*x + clamp(d, D), X)``

    holds for arbitrary d whenever the intersection is nonempty.  Both sides
    are returned as one scalar after an exact comparison; a mismatch raises,
    signalling a bug in the projection arithmetic.  (The identity is exact in
    real arithmetic; with floats it is exact whenever the additions involved
    are, e.g. for dyadic inputs of moderate magnitude.)
    """
    x_lo, x_hi = x_box
    d_lo, d_hi = d_box
    if x_lo > x_hi or d_lo > d_hi:
        raise ParameterError("boxes must be nonempty intervals")
    t = a * x
    inner_lo = max(x_lo - t, d_lo)
    inner_hi = min(x_hi - t, d_hi)
    if inner_lo > inner_hi:
        raise ParameterError("state-shifted box does not intersect the input box")
    lhs = t + min(max(d, inner_lo), inner_hi)
    rhs = min(max(t + min(max(d, d_lo), d_hi), x_lo), x_hi)
    if lhs != rhs:
        raise ProjectionIdentityError(
            f"projection orders disagree: {lhs!r} != {rhs!r} "
            f"(a={a}, X=[{x_lo},{x_hi}], D=[{d_lo},{d_hi}], x={x}, d={d})"
        )
    return lhs


def empirical_contraction(
    map_fn: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    pairs: int = 1000,
    seed: int = 0,
) -> float:
    """Largest observed expansion ratio ``|f(x)-f(y)| / |x-y|`` over random
    state pairs drawn uniformly from the box (seeded, reproducible)."""
    if pairs < 1:
        raise ParameterError("need at least one sample pair")
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        dist = float(np.linalg.norm(x - y))
        if dist == 0.0:
            continue
        ratio = float(np.linalg.norm(np.asarray(map_fn(x)) - np.asarray(map_fn(y)))) / dist
        worst = max(worst, ratio)
    return worst


def single_closed_loop_map(p: DerParams, sm: SupplyModel) -> Callable[[np.ndarray], np.ndarray]:
    """Closed form of the one-asset closed loop (exact, no price bisection):

    ``T(x) = clamp(a*x + clamp((r*x + c - beta2)/(q + beta1), D), X)``.

    Accepts scalars or arrays of states (vectorized over initial conditions).
    """
    gain = 1.0 / (p.q + sm.beta1)

    def T(x):
        x = np.asarray(x, dtype=float)
        d = np.clip(gain * (p.r * x + p.c - sm.beta2), p.d_lo, p.d_hi)
        return np.clip(p.a * x + d, p.x_lo, p.x_hi)

    return T


def decoupled_closed_loop_map(
    population: Sequence[DerParams], sm: SupplyModel
) -> Callable[[np.ndarray], np.ndarray]:
    """Surrogate closed loop certified by the population certificate:
    per-asset affine demand with sensitivity phi_i, double-clamped through
    the input and state boxes (componentwise nested-projection form)."""
    a = np.array([p.a for p in population])
    r = np.array([p.r for p in population])
    q = np.array([p.q for p in population])
    d_lo = np.array([p.d_lo for p in population])
    d_hi = np.array([p.d_hi for p in population])
    x_lo = np.array([p.x_lo for p in population])
    x_hi = np.array([p.x_hi for p in population])
    phi, _ = lambda_approx(q, sm.beta1)
    qp = CoupledQp.from_population(population, sm)
    offset = unconstrained_maximizer(qp, np.zeros(len(population)))

    def T(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = np.clip(phi * r * x + offset, d_lo, d_hi)
        return np.clip(a * x + d, x_lo, x_hi)

    return T
