"""Optional line plots of batch results (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bootstrap import ConfidenceBand  # noqa: E402
from .cluster_sim import TrajectoryFan  # noqa: E402
from .estimators import EstimateSeries, derived_probabilities  # noqa: E402

_STYLES = ["-", "--", ":", "-."]


def plot_estimates(series: EstimateSeries, outdir: str | Path) -> list[str]:
    """One PNG per quantity: R0, p, r, P(R=0), P(1<=R<=5), P(R>=20)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dates = [rec.effective_date for rec in series]
    paths = []

    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(dates, [rec.r0_hat for rec in series], color="black", lw=0.8, label="raw")
    ax.plot(dates, [rec.r0_smooth for rec in series], color="tab:blue", label="7-day mean")
    ax.axhline(1.0, color="grey", lw=0.5)
    ax.set_ylabel("R0 estimate")
    ax.legend()
    paths.append(_save(fig, outdir / "r0.png"))

    quantities = {
        "p_hat": lambda prm: prm.p,
        "r_hat": lambda prm: prm.r,
        "P0": lambda prm: derived_probabilities(prm)[0],
        "P1to5": lambda prm: derived_probabilities(prm)[1],
        "P20plus": lambda prm: derived_probabilities(prm)[2],
    }
    for name, fn in quantities.items():
        fig, ax = plt.subplots(figsize=(8, 3.5))
        for style, p0 in zip(_STYLES, series.config.p0_grid):
            ys = [None if rec.params(p0) is None else fn(rec.params(p0)) for rec in series]
            ax.plot(dates, [float("nan") if y is None else y for y in ys], "k" + style, label=f"p0={p0:g}")
        ax.set_ylabel(name)
        ax.legend()
        paths.append(_save(fig, outdir / f"{name}.png"))
    return paths


def plot_band(band: ConfidenceBand, path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    dates = [row.t for row in band]
    ax.plot(dates, [row.point for row in band], color="black", lw=0.8)
    ax.fill_between(dates, [row.lower for row in band], [row.upper for row in band], alpha=0.3)
    ax.set_ylabel(f"R0, {100 * (1 - band.config.alpha):g}% CI (p0={band.config.p0:g})")
    return _save(fig, path)


def plot_fans(fan: TrajectoryFan, baseline: TrajectoryFan | None, path: str | Path, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    if baseline is not None:
        ax.plot(baseline.dates, baseline.mean, color="tab:blue", lw=2, label="baseline")
        ax.plot(baseline.dates, baseline.q05, color="tab:blue", lw=0.6)
        ax.plot(baseline.dates, baseline.q95, color="tab:blue", lw=0.6)
    ax.plot(fan.dates, fan.mean, color="black", lw=2, label="tracing")
    ax.plot(fan.dates, fan.q05, color="black", lw=0.6)
    ax.plot(fan.dates, fan.q95, color="black", lw=0.6)
    ax.set_ylabel("reported daily infections")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def _save(fig, path: str | Path) -> str:
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
