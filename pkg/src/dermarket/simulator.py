"""Closed-loop simulation: per-period clearing, base-price schedules,
trajectory recording, equilibrium search and convergence classification.

Each market period the in-range assets bid, the market clears, and every
asset steps its state with the allocated (or fallback) consumption.  A
scenario is a population plus a base-price schedule; running it yields a
TimeSeries of prices, powers and states that serializes to CSV/JSON, and a
ConvergenceReport that classifies each schedule segment as converged,
oscillating or drifting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .bidding import make_curve
from .clearing import ClearingOutcome, SupplyModel, clear_market, default_price_tol
from .der import DerParams, MarketState, fallback_policy, step, validate_population
from .errors import MarketModelError, ParameterError

__all__ = [
    "ScenarioConfig",
    "TimeSeries",
    "SegmentReport",
    "ConvergenceReport",
    "EquilibriumResult",
    "closed_loop_step",
    "run_scenario",
    "find_equilibrium",
    "classify_segment",
    "analyze_series",
    "market_closed_loop_map",
]

CSV_BASE_COLUMNS = ("period", "beta2", "lambda", "aggregate_demand", "supply", "kkt_residual")


@dataclass(frozen=True)
class ScenarioConfig:
    """One reproducible experiment.

    schedule entries are (base_price, duration_in_periods) pairs applied in
    order; the horizon defaults to their total duration and may only cap it.
    The initial state is either explicit or drawn uniformly from each asset's
    box using per-asset substreams of the seed (so adding an asset never
    perturbs earlier assets' draws).
    """

    population: tuple[DerParams, ...]
    supply: SupplyModel
    schedule: tuple[tuple[float, int], ...]
    horizon: int | None = None
    initial_state: np.ndarray | None = None
    seed: int | None = None
    clearing_tol: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "population", tuple(self.population))
        validate_population(self.population)
        schedule = tuple((float(v), int(n)) for v, n in self.schedule)
        if len(schedule) == 0:
            raise ParameterError("schedule must contain at least one segment")
        if any(n < 1 for _, n in schedule):
            raise ParameterError("every schedule segment must last at least one period")
        if any(v <= 0.0 for v, _ in schedule):
            raise ParameterError("base prices must be > 0")
        object.__setattr__(self, "schedule", schedule)
        total = sum(n for _, n in schedule)
        if self.horizon is not None:
            if self.horizon < 0:
                raise ParameterError("horizon must be >= 0")
            if self.horizon > total:
                raise ParameterError(
                    f"horizon {self.horizon} exceeds the scheduled {total} periods"
                )
        if self.initial_state is not None:
            arr = np.asarray(self.initial_state, dtype=float)
            if arr.shape != (len(self.population),):
                raise ParameterError("initial state length must match the population")
            object.__setattr__(self, "initial_state", arr)
        elif self.seed is None:
            raise ParameterError("either an explicit initial state or a seed is required")

    @property
    def total_periods(self) -> int:
        total = sum(n for _, n in self.schedule)
        return total if self.horizon is None else self.horizon

    def beta2_per_period(self) -> np.ndarray:
        values = np.concatenate([np.full(n, v) for v, n in self.schedule])
        return values[: self.total_periods]

    def draw_initial_state(self) -> MarketState:
        if self.initial_state is not None:
            return MarketState(np.array(self.initial_state))
        from .generation import asset_streams  # local import; generation builds on this module's types

        streams = asset_streams(self.seed, len(self.population))
        x0 = np.array(
            [rng.uniform(p.x_lo, p.x_hi) for p, rng in zip(self.population, streams)]
        )
        return MarketState(x0)


@dataclass(frozen=True)
class TimeSeries:
    """Recorded trajectory: one clearing per period plus the state path
    (states has one more row than the clearing columns)."""

    beta2: np.ndarray
    lam: np.ndarray
    aggregate_demand: np.ndarray
    supply: np.ndarray
    kkt_residual: np.ndarray
    states: np.ndarray  # shape (horizon + 1, m)

    @property
    def horizon(self) -> int:
        return self.lam.shape[0]

    @property
    def m(self) -> int:
        return self.states.shape[1]

    def csv_columns(self, include_states: bool = True) -> list[str]:
        cols = list(CSV_BASE_COLUMNS)
        if include_states:
            cols += [f"x_{i + 1}" for i in range(self.m)]
        return cols

    def to_csv(self, path, include_states: bool = True) -> None:
        """Write one row per cleared period; the state columns hold the state
        the period's bids were built from.  Numbers use shortest round-trip
        decimal formatting, so identical runs produce identical bytes."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.csv_columns(include_states)) + "\n")
            for k in range(self.horizon):
                row = [
                    str(k),
                    repr(float(self.beta2[k])),
                    repr(float(self.lam[k])),
                    repr(float(self.aggregate_demand[k])),
                    repr(float(self.supply[k])),
                    repr(float(self.kkt_residual[k])),
                ]
                if include_states:
                    row += [repr(float(v)) for v in self.states[k]]
                fh.write(",".join(row) + "\n")

    def to_json_dict(self, include_states: bool = True) -> dict:
        doc = {
            "horizon": self.horizon,
            "m": self.m,
            "beta2": self.beta2.tolist(),
            "lambda": self.lam.tolist(),
            "aggregate_demand": self.aggregate_demand.tolist(),
            "supply": self.supply.tolist(),
            "kkt_residual": self.kkt_residual.tolist(),
        }
        if include_states:
            doc["states"] = self.states.tolist()  # horizon + 1 rows
        return doc

    def to_json(self, path, include_states: bool = True) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(include_states), fh, indent=1)
            fh.write("\n")


@dataclass(frozen=True)
class SegmentReport:
    """Classification of one schedule segment."""

    classification: str  # "converged" | "oscillating" | "drifting"
    settle_time: int | None
    rho_hat: float | None
    amplitude: float
    length: int
    start: int = 0
    beta2: float | None = None

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "length": self.length,
            "beta2": self.beta2,
            "classification": self.classification,
            "settle_time": self.settle_time,
            "rho_hat": self.rho_hat,
            "amplitude": self.amplitude,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    segments: tuple[SegmentReport, ...]

    def all_converged(self) -> bool:
        return all(s.classification == "converged" for s in self.segments)

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments]}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


@dataclass(frozen=True)
class EquilibriumResult:
    converged: bool
    state: MarketState
    residual: float
    iterations: int


def closed_loop_step(
    population: Sequence[DerParams],
    sm: SupplyModel,
    state: MarketState,
    tol: float | None = None,
) -> tuple[MarketState, ClearingOutcome]:
    """Advance every asset by one market period.

    In-range assets bid and receive the cleared allocation; out-of-range
    assets follow the fallback policy and are excluded from that period's
    welfare problem.  With no participants at all the market degenerates to
    the supply intercept: price = beta2, supply = 0 (keeps traces total).
    """
    x = state.x
    mask = state.in_box(population)
    participants = [i for i in range(len(population)) if mask[i]]

    d = np.empty(len(population))
    for i in range(len(population)):
        if not mask[i]:
            d[i] = fallback_policy(population[i], x[i])

    if participants:
        curves = [make_curve(population[i], x[i]) for i in participants]
        outcome = clear_market(curves, sm, tol)
        for j, i in enumerate(participants):
            d[i] = outcome.d_star[j]
    else:
        outcome = ClearingOutcome(sm.beta2, np.empty(0), 0.0, 0.0, 0.0, 0)

    x_next = np.array([step(p, x[i], d[i]) for i, p in enumerate(population)])
    return MarketState(x_next), outcome


def run_scenario(cfg: ScenarioConfig) -> TimeSeries:
    """Run the scheduled horizon; deterministic given the config (seed
    included).  A clearing failure aborts with the offending period index."""
    horizon = cfg.total_periods
    beta2 = cfg.beta2_per_period()
    state = cfg.draw_initial_state()

    m = len(cfg.population)
    lam = np.empty(horizon)
    demand = np.empty(horizon)
    supply = np.empty(horizon)
    kkt = np.empty(horizon)
    states = np.empty((horizon + 1, m))
    states[0] = state.x

    for k in range(horizon):
        sm_k = SupplyModel(cfg.supply.beta1, float(beta2[k]))
        try:
            state, outcome = closed_loop_step(cfg.population, sm_k, state, cfg.clearing_tol)
        except ParameterError:
            raise
        except MarketModelError as exc:
            raise type(exc)(f"period {k}: {exc}") from exc
        lam[k] = outcome.lambda_star
        demand[k] = float(np.sum(outcome.d_star))
        supply[k] = outcome.s_star
        kkt[k] = outcome.kkt_residual
        states[k + 1] = state.x

    return TimeSeries(beta2, lam, demand, supply, kkt, states)


def find_equilibrium(
    population: Sequence[DerParams],
    sm: SupplyModel,
    x0,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> EquilibriumResult:
    """Fixed-point iteration of the closed loop.

    Succeeds when one step moves the state by at most tol (2-norm); the
    returned state then satisfies ``(I - A) x = d*(x)`` within tol.  Failure
    (iteration cap) is an expected outcome for unstable configurations and is
    reported, not raised.
    """
    state = MarketState(np.atleast_1d(np.asarray(x0, dtype=float)))
    residual = np.inf
    for it in range(1, max_iters + 1):
        nxt, _ = closed_loop_step(population, sm, state, tol=min(tol, 1e-10) * 1e-3)
        residual = float(np.linalg.norm(nxt.x - state.x))
        state = nxt
        if residual <= tol:
            return EquilibriumResult(True, state, residual, it)
    return EquilibriumResult(False, state, residual, max_iters)


def classify_segment(
    lambdas: np.ndarray,
    states: np.ndarray | None = None,
    clearing_tol: float = 1e-10,
) -> SegmentReport:
    """Classify one schedule segment from its price slice (optionally with
    the matching state rows, used for the decay-rate fit).

    converged:   every price increment over the last 5 periods is below
                 0.1% of max(1, |mean price|).
    oscillating: otherwise, if the peak-to-peak price over the last 10
                 periods exceeds 1% of the same scale.
    drifting:    otherwise.

    settle_time is the first period index after which all increments stay
    below the converged threshold.  rho_hat is exp(slope) of a least-squares
    line through log-deviations from the segment's final value; periods whose
    deviation has fallen to the numerical floor (10x the clearing tolerance)
    are excluded from the fit.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    n = lambdas.shape[0]
    if n < 4:
        raise ParameterError("segment classification needs at least 4 periods")
    scale = max(1.0, abs(float(np.mean(lambdas))))
    conv_thresh = 1e-3 * scale
    diffs = np.abs(np.diff(lambdas))
    amplitude = float(np.ptp(lambdas[-min(10, n):]))

    if float(np.max(diffs[-min(5, n - 1):])) < conv_thresh:
        above = np.nonzero(diffs >= conv_thresh)[0]
        settle = 0 if above.size == 0 else int(above[-1]) + 1
        return SegmentReport(
            "converged", settle, _fit_decay_rate(lambdas, states, clearing_tol), amplitude, n
        )
    classification = "oscillating" if amplitude > 0.01 * scale else "drifting"
    return SegmentReport(classification, None, None, amplitude, n)


def _fit_decay_rate(
    lambdas: np.ndarray, states: np.ndarray | None, clearing_tol: float
) -> float | None:
    if states is not None:
        dev = np.linalg.norm(states - states[-1], axis=1)
    else:
        dev = np.abs(lambdas - lambdas[-1])
    if dev.shape[0] < 4:
        return None
    dev = dev[:-1]  # final deviation is zero by construction
    floor = max(10.0 * clearing_tol, 1e-12 * float(np.max(dev, initial=0.0)))
    usable = dev > floor
    # fit only the initial settling window: stop at the first floored period
    first_floor = np.argmin(usable) if not usable.all() else dev.shape[0]
    if first_floor < 3:
        return None
    k = np.arange(first_floor)
    slope = np.polyfit(k, np.log(dev[:first_floor]), 1)[0]
    return float(np.exp(slope))


def analyze_series(series: TimeSeries, cfg: ScenarioConfig) -> ConvergenceReport:
    """Per-segment ConvergenceReport for a recorded scenario run."""
    reports = []
    start = 0
    for value, duration in cfg.schedule:
        stop = min(start + duration, series.horizon)
        if stop - start >= 4:
            entry = classify_segment(
                series.lam[start:stop],
                series.states[start : stop + 1],
                cfg.clearing_tol if cfg.clearing_tol is not None else default_price_tol(cfg.supply),
            )
            reports.append(replace(entry, start=start, beta2=value))
        if stop >= series.horizon:
            break
        start = stop
    return ConvergenceReport(tuple(reports))


def market_closed_loop_map(
    population: Sequence[DerParams], sm: SupplyModel, tol: float | None = None
):
    """The true closed-loop state map (one full market clearing per call)."""

    def T(x: np.ndarray) -> np.ndarray:
        nxt, _ = closed_loop_step(population, sm, MarketState(np.asarray(x, dtype=float)), tol)
        return nxt.x

    return T
