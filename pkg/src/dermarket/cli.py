"""Command-line front end.

Subcommands:

  generate   draw a population from a generation spec; with --emit-config,
             write a fully explicit, round-trippable config document
  clear      run one market clearing at the configured state
  simulate   run the scheduled scenario; write CSV/JSON series, a manifest,
             the per-segment convergence report, and report figures
  certify    print the stability certificate for the configured population

Every subcommand accepts --config, --seed (overrides the config seed),
--output and --json.  Exit codes: 0 success, 1 config error, 2 runtime
(clearing) failure.  The MARKET_LOG environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bidding import make_curve
from .clearing import ClearingOutcome, clear_market
from .config import AppConfig, build_scenario, emit_config, load_config, resolve_population
from .errors import ConfigError, MarketModelError
from .simulator import analyze_series, run_scenario
from .stability import certify_multi, certify_single

log = logging.getLogger(__name__)


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.handler(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MarketModelError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def _setup_logging() -> None:
    level = os.environ.get("MARKET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dermarket",
        description="Simulate and certify a multi-period electricity market of dynamic assets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--output", type=Path, default=None, help="output file or directory")
        p.add_argument("--json", action="store_true", help="machine-readable stdout")

    p = sub.add_parser("generate", help="draw a population and emit it")
    common(p)
    p.add_argument("--emit-config", action="store_true",
                   help="write a fully explicit config reproducing this population")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("clear", help="clear the market once at the configured state")
    common(p)
    p.set_defaults(handler=cmd_clear)

    p = sub.add_parser("simulate", help="run the scheduled scenario")
    common(p)
    p.add_argument("--no-states", action="store_true", help="omit state columns from the CSV")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("certify", help="evaluate the stability certificate")
    common(p)
    p.set_defaults(handler=cmd_certify)
    return parser


def cmd_generate(args, cfg: AppConfig) -> int:
    population, state = resolve_population(cfg, args.seed)
    if args.emit_config:
        doc = emit_config(population, state, cfg)
        text = json.dumps(doc, indent=1)
        if args.output is not None:
            args.output.write_text(text + "\n")
            print(f"wrote explicit config for m={len(population)} to {args.output}")
        else:
            print(text)
        return 0

    a = np.array([p.a for p in population])
    q = np.array([p.q for p in population])
    summary = {
        "m": len(population),
        "a_range": [float(a.min()), float(a.max())],
        "q_range": [float(q.min()), float(q.max())],
        "x0_range": [float(state.x.min()), float(state.x.max())],
    }
    if args.json:
        print(json.dumps(summary))
    else:
        print(f"generated m={summary['m']} assets; "
              f"a in [{summary['a_range'][0]:.4g}, {summary['a_range'][1]:.4g}], "
              f"q in [{summary['q_range'][0]:.4g}, {summary['q_range'][1]:.4g}], "
              f"x0 in [{summary['x0_range'][0]:.6g}, {summary['x0_range'][1]:.6g}]")
    return 0


def cmd_clear(args, cfg: AppConfig) -> int:
    population, state = resolve_population(cfg, args.seed)
    mask = state.in_box(population)
    participants = [i for i in range(len(population)) if mask[i]]
    if participants:
        curves = [make_curve(population[i], state.x[i]) for i in participants]
        outcome = clear_market(curves, cfg.supply, cfg.clearing_tol)
    else:
        outcome = ClearingOutcome(cfg.supply.beta2, np.empty(0), 0.0, 0.0, 0.0, 0)

    doc = {
        "lambda_star": outcome.lambda_star,
        "s_star": outcome.s_star,
        "aggregate_demand": float(np.sum(outcome.d_star)),
        "gap": outcome.gap,
        "kkt_residual": outcome.kkt_residual,
        "iterations": outcome.iterations,
        "participants": participants,
        "d_star": outcome.d_star.tolist(),
    }
    if args.output is not None:
        args.output.write_text(json.dumps(doc, indent=1) + "\n")
    if args.json:
        print(json.dumps(doc))
    else:
        print(f"lambda* = {outcome.lambda_star:.10g}  s* = {outcome.s_star:.10g}  "
              f"gap = {outcome.gap:.3g}  kkt = {outcome.kkt_residual:.3g}  "
              f"iterations = {outcome.iterations}")
    return 0


def cmd_simulate(args, cfg: AppConfig) -> int:
    scenario = build_scenario(cfg, args.seed)
    series = run_scenario(scenario)
    report = analyze_series(series, scenario)

    if args.output is not None:
        outdir = args.output
        outdir.mkdir(parents=True, exist_ok=True)
        include_states = not args.no_states
        series.to_csv(outdir / "timeseries.csv", include_states)
        series.to_json(outdir / "timeseries.json", include_states)
        report.to_json(outdir / "report.json")
        figures: list[str] = []
        if not args.no_plot:
            from .plots import render_report_figures  # deferred: pulls in matplotlib

            figures = render_report_figures(series, outdir)
        manifest = {
            "csv": "timeseries.csv",
            "json": "timeseries.json",
            "report": "report.json",
            "columns": series.csv_columns(include_states),
            "m": series.m,
            "horizon": series.horizon,
            "figures": figures,
        }
        (outdir / "series.json").write_text(json.dumps(manifest, indent=1) + "\n")
        log.info("wrote series, report and %d figures to %s", len(figures), outdir)

    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        for seg in report.segments:
            settle = "-" if seg.settle_time is None else str(seg.settle_time)
            print(f"segment @ {seg.start:4d} (beta2={seg.beta2:g}): {seg.classification:11s} "
                  f"settle={settle:>3s} amplitude={seg.amplitude:.4g}")
    return 0


def cmd_certify(args, cfg: AppConfig) -> int:
    population, _ = resolve_population(cfg, args.seed)
    if len(population) == 1:
        cert = certify_single(population[0], cfg.supply)
    else:
        cert = certify_multi(population, cfg.supply)

    if args.output is not None:
        args.output.write_text(json.dumps(cert.to_dict(), indent=1) + "\n")
    if args.json:
        print(json.dumps(cert.to_dict()))
    else:
        margins = cert.margins
        verdict = "certified-stable" if cert.certified else "not-certified"
        print(f"m = {len(population)}  verdict: {verdict}")
        print(f"margins: min {margins.min():.6g}  max {margins.max():.6g}  "
              f"worst |margin| {abs(margins[cert.worst_index]):.6g} (asset {cert.worst_index})")
        print(f"phi: min {cert.phi.min():.6g}  max {cert.phi.max():.6g}  "
              f"epsilon = {cert.epsilon:.6g}  contraction factor = {cert.contraction_factor:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
