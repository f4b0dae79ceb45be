"""JSON configuration documents for the command-line front end.

A config has four sections:

  population   either {"assets": [...], "x0": [...] | "uniform_box"} with
               explicit per-asset constants, or {"generate": {...}} with
               per-field distribution rules (see docs/config-schema.json).
  supply       {"beta1": ..., "beta2": ...}
  schedule     [[base_price, duration], ...]          (optional for certify/clear)
  simulation   {"horizon": ..., "clearing_tol": ...}  (optional)

plus a top-level "seed".  All randomness (generated populations and
box-uniform initial states) flows from that one seed through per-asset
substreams, so a config plus seed pins the whole experiment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .clearing import SupplyModel
from .der import DerParams, MarketState, validate_population
from .errors import ConfigError, MarketModelError
from .generation import (
    BOX_UNIFORM,
    Const,
    GenerationSpec,
    Offset,
    Scale,
    Uniform,
    asset_streams,
    generate_population,
)
from .simulator import ScenarioConfig

__all__ = [
    "AppConfig",
    "load_config",
    "parse_config",
    "resolve_population",
    "build_scenario",
    "emit_config",
]

log = logging.getLogger(__name__)

_ASSET_FIELDS = ("a", "x_lo", "x_hi", "d_lo", "d_hi", "q", "r", "c")
_RULE_FIELDS = ("a", "x_ref", "x_lo", "x_hi", "d_lo", "d_hi", "q", "r", "c", "x0")


@dataclass(frozen=True)
class AppConfig:
    """Parsed configuration document."""

    population: Union[GenerationSpec, list[DerParams]]
    x0: Any  # explicit list, "uniform_box", or None (only with a GenerationSpec)
    supply: SupplyModel
    schedule: tuple[tuple[float, int], ...] | None
    horizon: int | None
    clearing_tol: float | None
    seed: int | None

    def needs_seed(self) -> bool:
        return isinstance(self.population, GenerationSpec) or self.x0 == BOX_UNIFORM


def load_config(path) -> AppConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def parse_config(doc: dict) -> AppConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - {"population", "supply", "schedule", "simulation", "seed"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    supply_doc = _require(doc, "supply", dict)
    if set(supply_doc) - {"beta1", "beta2"}:
        raise ConfigError(f"unknown supply fields: {sorted(set(supply_doc) - {'beta1', 'beta2'})}")
    try:
        supply = SupplyModel(
            beta1=_number(supply_doc, "supply.beta1"), beta2=_number(supply_doc, "supply.beta2")
        )
    except MarketModelError as exc:
        raise ConfigError(f"supply: {exc}") from exc

    pop_doc = _require(doc, "population", dict)
    population, x0 = _parse_population(pop_doc)

    schedule = None
    if "schedule" in doc:
        schedule = _parse_schedule(doc["schedule"])

    sim = doc.get("simulation", {})
    if not isinstance(sim, dict):
        raise ConfigError("simulation section must be an object")
    if set(sim) - {"horizon", "clearing_tol"}:
        raise ConfigError(
            f"unknown simulation fields: {sorted(set(sim) - {'horizon', 'clearing_tol'})}"
        )
    horizon = sim.get("horizon")
    if horizon is not None and (not isinstance(horizon, int) or horizon < 0):
        raise ConfigError(f"simulation.horizon must be a nonnegative integer, got {horizon!r}")
    clearing_tol = sim.get("clearing_tol")
    if clearing_tol is not None and not (
        isinstance(clearing_tol, (int, float)) and clearing_tol > 0
    ):
        raise ConfigError(f"simulation.clearing_tol must be > 0, got {clearing_tol!r}")

    seed = doc.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")

    return AppConfig(population, x0, supply, schedule, horizon, clearing_tol, seed)


def _require(doc: dict, key: str, typ) -> Any:
    if key not in doc:
        raise ConfigError(f"missing required section {key!r}")
    value = doc[key]
    if not isinstance(value, typ):
        raise ConfigError(f"section {key!r} must be of type {typ.__name__}")
    return value


def _number(doc: dict, dotted: str) -> float:
    key = dotted.split(".")[-1]
    if key not in doc:
        raise ConfigError(f"missing required field {dotted!r}")
    value = doc[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"field {dotted!r} must be a number, got {value!r}")
    return float(value)


def _parse_population(doc: dict):
    if ("assets" in doc) == ("generate" in doc):
        raise ConfigError("population must contain exactly one of 'assets' or 'generate'")

    if "assets" in doc:
        assets_doc = doc["assets"]
        if not isinstance(assets_doc, list) or not assets_doc:
            raise ConfigError("population.assets must be a nonempty list")
        assets = []
        for i, entry in enumerate(assets_doc):
            if not isinstance(entry, dict) or set(entry) != set(_ASSET_FIELDS):
                raise ConfigError(
                    f"population.assets[{i}] must contain exactly the fields {_ASSET_FIELDS}"
                )
            try:
                assets.append(DerParams(**{k: _number(entry, f"assets[{i}].{k}") for k in entry}))
            except MarketModelError as exc:
                raise ConfigError(f"population.assets[{i}]: {exc}") from exc
        x0 = doc.get("x0", BOX_UNIFORM)
        if x0 != BOX_UNIFORM:
            if not isinstance(x0, list) or len(x0) != len(assets):
                raise ConfigError("population.x0 must be 'uniform_box' or one number per asset")
            x0 = [float(v) for v in x0]
        return assets, x0

    gen_doc = doc["generate"]
    if not isinstance(gen_doc, dict):
        raise ConfigError("population.generate must be an object")
    if "m" not in gen_doc or not isinstance(gen_doc["m"], int) or gen_doc["m"] < 1:
        raise ConfigError("population.generate.m must be a positive integer")
    unknown = set(gen_doc) - set(_RULE_FIELDS) - {"m"}
    if unknown:
        raise ConfigError(f"unknown generation fields: {sorted(unknown)}")
    rules = {}
    for name in _RULE_FIELDS:
        if name == "x_ref":
            rules[name] = _parse_rule(gen_doc[name], name) if name in gen_doc else None
            continue
        if name not in gen_doc:
            raise ConfigError(f"population.generate is missing the field {name!r}")
        if name == "x0" and gen_doc[name] == BOX_UNIFORM:
            rules[name] = BOX_UNIFORM
        else:
            rules[name] = _parse_rule(gen_doc[name], name)
    try:
        spec = GenerationSpec(m=gen_doc["m"], **rules)
    except MarketModelError as exc:
        raise ConfigError(str(exc)) from exc
    return spec, None


def _parse_rule(value, name: str):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Const(float(value))
    if isinstance(value, dict):
        if set(value) == {"uniform"}:
            bounds = value["uniform"]
            if not (isinstance(bounds, list) and len(bounds) == 2):
                raise ConfigError(f"field {name!r}: uniform needs [lo, hi]")
            lo, hi = float(bounds[0]), float(bounds[1])
            if lo > hi:
                log.warning("field %s: uniform endpoints [%g, %g] reversed; normalizing", name, lo, hi)
            return Uniform(min(lo, hi), max(lo, hi))
        if set(value) == {"scale_of", "coeff"}:
            return Scale(of=str(value["scale_of"]), coeff=float(value["coeff"]))
        if set(value) == {"offset_of", "delta"}:
            return Offset(of=str(value["offset_of"]), delta=float(value["delta"]))
    raise ConfigError(
        f"field {name!r}: expected a number, {{'uniform': [lo, hi]}}, "
        f"{{'scale_of': ..., 'coeff': ...}} or {{'offset_of': ..., 'delta': ...}}"
    )


def resolve_population(
    cfg: AppConfig, seed: int | None = None
) -> tuple[list[DerParams], MarketState]:
    """Materialize the population and initial state (drawing where needed).

    An explicit --seed argument overrides the config-level seed.
    """
    effective_seed = seed if seed is not None else cfg.seed
    if cfg.needs_seed() and effective_seed is None:
        raise ConfigError("this config draws random values; provide a seed")

    if isinstance(cfg.population, GenerationSpec):
        try:
            population, x0 = generate_population(cfg.population, effective_seed)
        except MarketModelError as exc:
            raise ConfigError(str(exc)) from exc
        return population, MarketState(x0)

    population = list(cfg.population)
    try:
        validate_population(population)
    except MarketModelError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.x0 == BOX_UNIFORM:
        streams = asset_streams(effective_seed, len(population))
        x0 = np.array([rng.uniform(p.x_lo, p.x_hi) for p, rng in zip(population, streams)])
    else:
        x0 = np.asarray(cfg.x0, dtype=float)
    return population, MarketState(x0)


def build_scenario(cfg: AppConfig, seed: int | None = None) -> ScenarioConfig:
    """ScenarioConfig for `simulate`: requires a schedule."""
    if cfg.schedule is None:
        raise ConfigError("simulation requires a 'schedule' section")
    population, state = resolve_population(cfg, seed)
    try:
        return ScenarioConfig(
            population=tuple(population),
            supply=cfg.supply,
            schedule=cfg.schedule,
            horizon=cfg.horizon,
            initial_state=state.x,
            clearing_tol=cfg.clearing_tol,
        )
    except MarketModelError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_schedule(value) -> tuple[tuple[float, int], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("schedule must be a nonempty list of [base_price, duration] pairs")
    out = []
    for i, entry in enumerate(value):
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ConfigError(f"schedule[{i}] must be a [base_price, duration] pair")
        price, duration = entry
        if not isinstance(price, (int, float)) or isinstance(price, bool) or price <= 0:
            raise ConfigError(f"schedule[{i}]: base price must be a positive number")
        if not isinstance(duration, int) or duration < 1:
            raise ConfigError(f"schedule[{i}]: duration must be a positive integer")
        out.append((float(price), duration))
    return tuple(out)


def emit_config(
    population: list[DerParams],
    x0: MarketState,
    cfg: AppConfig,
) -> dict:
    """Round-trippable document with the population spelled out explicitly
    (used by `generate --emit-config`); re-ingesting it reproduces the same
    population and initial state bit for bit."""
    doc: dict = {
        "population": {
            "assets": [
                {k: getattr(p, k) for k in _ASSET_FIELDS} for p in population
            ],
            "x0": [float(v) for v in x0.x],
        },
        "supply": {"beta1": cfg.supply.beta1, "beta2": cfg.supply.beta2},
    }
    if cfg.schedule is not None:
        doc["schedule"] = [[v, n] for v, n in cfg.schedule]
    sim = {}
    if cfg.horizon is not None:
        sim["horizon"] = cfg.horizon
    if cfg.clearing_tol is not None:
        sim["clearing_tol"] = cfg.clearing_tol
    if sim:
        doc["simulation"] = sim
    return doc
