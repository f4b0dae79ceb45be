"""Figure rendering for simulation reports (file output only, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulator import TimeSeries

__all__ = ["render_price_figure", "render_power_figure", "render_report_figures"]

_FIGSIZE = (7.0, 3.2)


def _period_axis(ax, horizon: int):
    ax.set_xlim(0, max(1, horizon - 1))
    ax.set_xlabel("market period")
    ax.grid(True, alpha=0.3)


def render_price_figure(series: TimeSeries, path) -> None:
    """Clearing price and base price vs. period."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    k = np.arange(series.horizon)
    ax.plot(k, series.lam, lw=1.2, label="clearing price")
    ax.step(k, series.beta2, where="post", lw=1.0, ls="--", color="gray", label="base price")
    ax.set_ylabel("price")
    ax.legend(loc="best", fontsize=8)
    _period_axis(ax, series.horizon)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_power_figure(series: TimeSeries, path) -> None:
    """Aggregate cleared demand and supply vs. period."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    k = np.arange(series.horizon)
    ax.plot(k, series.aggregate_demand, lw=1.2, label="aggregate demand")
    ax.plot(k, series.supply, lw=0.8, ls=":", label="supply")
    ax.set_ylabel("power")
    ax.legend(loc="best", fontsize=8)
    _period_axis(ax, series.horizon)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(series: TimeSeries, directory) -> list[str]:
    """Render the standard report figures into a directory; returns the
    file names written (referenced from the series manifest)."""
    names = []
    for name, renderer in (("price.png", render_price_figure), ("power.png", render_power_figure)):
        renderer(series, directory / name)
        names.append(name)
    return names
