"""Parametric bootstrap intervals for the mean reproduction number.

At report date ``t`` the national weekly sum is resampled as

    S*(t) ~ NB(q(t), r(t) * D*(t) / p0),    R*(t) = S*(t) / D*(t),

where ``D*(t)`` is the weekly sum one generation earlier. In ``fixed`` mode
``D*`` is the observed sum. In ``recursive`` mode it is the resampled sum of
the same replicate whenever that date was itself resampled, and the observed
sum otherwise (the starting values).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .estimators import EstimateSeries
from .ingest import CasePanel, ConfigError, rolling_sums
from .negbin import ThinningRate, draw_nb, thin_params
from .rng import substream

Mode = Literal["fixed", "recursive"]


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    alpha: float = 0.05
    p0: float = 0.2
    mode: Mode = "fixed"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.B < 100:
            raise ConfigError(f"B must be >= 100, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mode not in ("fixed", "recursive"):
            raise ConfigError(f"mode must be 'fixed' or 'recursive', got {self.mode!r}")
        ThinningRate(self.p0)
        order_indices(self.B, self.alpha)


def order_indices(B: int, alpha: float) -> tuple[int, int]:
    """1-based order statistics ``[B alpha/2]`` and ``[B (1 - alpha/2)]``."""
    q1 = math.floor(B * alpha / 2 + 1e-9)
    q2 = math.floor(B * (1 - alpha / 2) + 1e-9)
    if q1 < 1:
        raise ConfigError(f"B={B} is too small for alpha={alpha}: lower order statistic index is 0")
    return q1, q2


@dataclass(frozen=True)
class BandRow:
    t: dt.date
    point: float
    lower: float
    upper: float


@dataclass(frozen=True)
class ConfidenceBand:
    rows: tuple[BandRow, ...]
    config: BootstrapConfig

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def at(self, t: dt.date) -> BandRow | None:
        return next((row for row in self.rows if row.t == t), None)

    def write_csv(self, path: str | Path) -> None:
        c = self.config
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "point", "lower", "upper", "alpha", "p0", "mode", "B"])
            for row in self.rows:
                w.writerow([row.t.isoformat(), repr(row.point), repr(row.lower), repr(row.upper),
                            c.alpha, c.p0, c.mode, c.B])


@dataclass(frozen=True)
class Replicates:
    """Bootstrap ratios ``R*`` per date, plus the law used to draw them."""

    dates: tuple[dt.date, ...]
    point: NDArray[np.float64]
    ratios: NDArray[np.float64]  # (n_dates, B)
    q: NDArray[np.float64]
    r: NDArray[np.float64]
    denominator: NDArray[np.float64]  # observed lagged weekly sum


def bootstrap_replicates(panel: CasePanel, estimates: EstimateSeries, config: BootstrapConfig) -> Replicates:
    """Draw the ``B`` bootstrap ratios for every date with solvable parameters."""
    pc = estimates.config
    w, g, p0 = pc.window, pc.gen_time, config.p0
    weekly = rolling_sums(panel.national, w)
    rows, points, qs, rs, dens = [], [], [], [], []
    for rec in estimates:
        prm = rec.params(p0)
        if prm is None or rec.r0_hat is None:
            continue
        i = panel.index_of(rec.t)
        den = weekly[i - g]
        if not den > 0:
            continue
        rows.append(i)
        points.append(rec.r0_hat)
        qs.append(thin_params(prm, p0).p)
        rs.append(prm.r)
        dens.append(den)

    B = config.B
    ratios = np.empty((len(rows), B))
    resampled: dict[int, NDArray[np.float64]] = {}
    for n, i in enumerate(rows):
        rng = substream(config.seed, i)
        if config.mode == "recursive" and (i - g) in resampled:
            den = resampled[i - g]
        else:
            den = np.full(B, dens[n])
        num = draw_nb(rng, qs[n], rs[n] * den / p0).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[n] = np.where(den > 0, num / den, np.nan)
        if config.mode == "recursive":
            resampled[i] = num
    return Replicates(
        dates=tuple(panel.dates[i] for i in rows),
        point=np.asarray(points, dtype=np.float64),
        ratios=ratios,
        q=np.asarray(qs),
        r=np.asarray(rs),
        denominator=np.asarray(dens),
    )


def band_from_replicates(reps: Replicates, config: BootstrapConfig, alpha: float | None = None) -> ConfidenceBand:
    """Percentile interval from order statistics of each date's replicates.

    Replicates with an undefined ratio (zero resampled denominator) are dropped
    and the order statistics are taken over the remaining ones.
    """
    alpha = config.alpha if alpha is None else alpha
    out = []
    for t, point, row in zip(reps.dates, reps.point, reps.ratios):
        vals = np.sort(row[np.isfinite(row)])
        if vals.size < 100:
            continue
        q1, q2 = order_indices(vals.size, alpha)
        out.append(BandRow(t, float(point), float(vals[q1 - 1]), float(vals[q2 - 1])))
    return ConfidenceBand(tuple(out), config)


def bootstrap_ci(panel: CasePanel, estimates: EstimateSeries, config: BootstrapConfig) -> ConfidenceBand:
    """Pointwise ``(1 - alpha)`` intervals for every date with solvable estimates.

    ``estimates`` must have been produced with ``config.p0`` in its grid.
    """
    if float(config.p0) not in estimates.config.p0_grid:
        raise ConfigError(f"p0={config.p0} is not in the estimate grid {estimates.config.p0_grid}")
    return band_from_replicates(bootstrap_replicates(panel, estimates, config), config)
