"""Seeded population generation from per-field distribution rules.

Randomness comes from NumPy's PCG64 generator.  One root SeedSequence per
config-level seed is split into one child stream per asset index, and each
asset consumes its draws from its own stream in a fixed field order
(a, x_ref, x_lo, x_hi, d_lo, d_hi, q, r, c, x0).  Appending an asset to a
spec therefore never perturbs the draws of earlier assets, and populations
are bit-reproducible across machines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .der import DerParams, check_controllability
from .errors import GenerationError, ParameterError

__all__ = [
    "Const",
    "Uniform",
    "Scale",
    "Offset",
    "BOX_UNIFORM",
    "GenerationSpec",
    "generate_population",
    "asset_streams",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Uniform:
    """Uniform draw on [lo, hi]; reversed endpoints are normalized."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            lo, hi = self.hi, self.lo
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class Scale:
    """Value proportional to another drawn field of the same asset."""

    of: str  # "a" or "x_ref"
    coeff: float


@dataclass(frozen=True)
class Offset:
    """Value displaced from another drawn field of the same asset."""

    of: str
    delta: float


#: Marker for initial states drawn uniformly over each asset's own state box.
BOX_UNIFORM = "uniform_box"

FieldRule = Union[Const, Uniform, Scale, Offset]


@dataclass(frozen=True)
class GenerationSpec:
    """Distribution rules for one population, one rule per asset constant.

    x_ref is an optional intermediate draw other fields may reference via
    Scale/Offset rules (e.g. state bounds placed symmetrically around it).
    x0 may additionally be BOX_UNIFORM to sample the initial state inside the
    generated state box.
    """

    m: int
    a: FieldRule
    x_lo: FieldRule
    x_hi: FieldRule
    d_lo: FieldRule
    d_hi: FieldRule
    q: FieldRule
    r: FieldRule
    c: FieldRule
    x0: Union[FieldRule, str]
    x_ref: FieldRule | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"population size must be >= 1, got m={self.m}")


def _evaluate(rule: FieldRule, context: dict, rng: np.random.Generator, name: str) -> float:
    if isinstance(rule, Const):
        return rule.value
    if isinstance(rule, Uniform):
        return float(rng.uniform(rule.lo, rule.hi))
    if isinstance(rule, (Scale, Offset)):
        if rule.of not in context or context[rule.of] is None:
            raise GenerationError(f"field {name} references undrawn field {rule.of!r}")
        base = context[rule.of]
        return rule.coeff * base if isinstance(rule, Scale) else base + rule.delta
    raise GenerationError(f"unsupported rule for field {name}: {rule!r}")


def generate_population(spec: GenerationSpec, seed: int) -> tuple[list[DerParams], np.ndarray]:
    """Draw the population and its initial states.

    Pure function of (spec, seed).  An asset that fails controllability
    rejects the whole spec with the offending index and margins; generation
    is never silently retried, which would break reproducibility.
    """
    streams = asset_streams(seed, spec.m)
    population: list[DerParams] = []
    x0 = np.empty(spec.m)
    for i, rng in enumerate(streams):
        ctx: dict = {}
        ctx["a"] = _evaluate(spec.a, ctx, rng, "a")
        ctx["x_ref"] = (
            _evaluate(spec.x_ref, ctx, rng, "x_ref") if spec.x_ref is not None else None
        )
        values = {}
        for name in ("x_lo", "x_hi", "d_lo", "d_hi", "q", "r", "c"):
            values[name] = _evaluate(getattr(spec, name), ctx, rng, name)
        try:
            params = DerParams(a=ctx["a"], **values)
        except ParameterError as exc:
            raise GenerationError(f"asset {i}: {exc}") from exc
        ok, margins = check_controllability(params)
        if not ok:
            raise GenerationError(
                f"asset {i} is uncontrollable (margins {margins}); "
                "the generation rules are rejected"
            )
        if spec.x0 == BOX_UNIFORM:
            x0[i] = rng.uniform(params.x_lo, params.x_hi)
        else:
            x0[i] = _evaluate(spec.x0, ctx, rng, "x0")
        population.append(params)
    return population, x0


def asset_streams(seed: int, m: int) -> list[np.random.Generator]:
    """One independent PCG64 stream per asset index, split from the seed."""
    if seed is None:
        raise ParameterError("a seed is required to draw a population")
    root = np.random.SeedSequence(int(seed))
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(m)]
