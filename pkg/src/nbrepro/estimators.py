"""Moment estimators of the reproduction-number law from reported counts.

For a report date ``t`` the national ratio of weekly sums

    R(t) = sum_{s<w} RKI[t-s] / sum_{s<w} RKI[t-g-s]

estimates E(R) at infection date ``t - tau - w``. The same ratio per district,
weighted by its denominator, gives the dispersion estimate ``var_s_scaled``
(an estimate of Var(reported secondaries) / p0). Given an assumed reporting
rate p0, the two moments are inverted to NB(p, r).
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .ingest import CasePanel, DateLike, DateRangeError, PipelineConfig, moving_average, rolling_sums
from .negbin import NegBinParams, ThinningRate, nb_pmf


class Unsolvable(NamedTuple):
    """Marker for moments that admit no NB(p, r) with 0 < p < 1."""

    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class DistrictRatio:
    district: str
    ratio: float
    weight: float


@dataclass(frozen=True)
class P0Estimate:
    p0: float
    params: NegBinParams | None
    reason: str | None = None

    @property
    def solvable(self) -> bool:
        return self.params is not None

    @property
    def p_hat(self) -> float | None:
        return None if self.params is None else self.params.p

    @property
    def r_hat(self) -> float | None:
        return None if self.params is None else self.params.r

    @property
    def var_r_hat(self) -> float | None:
        return None if self.params is None else self.params.variance


@dataclass(frozen=True)
class EstimateRecord:
    """Estimates at report date ``t``; they describe infections on ``effective_date``.

    ``r0_hat`` and ``var_s_scaled`` are the raw daily moments; the per-p0
    parameters are solved from their smoothed versions ``r0_smooth`` and
    ``var_s_smooth``.
    """

    t: dt.date
    effective_date: dt.date
    r0_hat: float | None
    var_s_scaled: float | None
    r0_smooth: float | None
    var_s_smooth: float | None
    n_districts: int
    per_p0: dict[float, P0Estimate] = field(default_factory=dict)

    def params(self, p0: float) -> NegBinParams | None:
        est = self.per_p0.get(float(p0))
        return None if est is None else est.params


def _check_lags(panel: CasePanel, i: int, config: PipelineConfig) -> None:
    need = config.gen_time + config.window - 1
    if i - need < 0:
        raise DateRangeError(f"{panel.dates[i]}: needs {need} earlier days of data")


def _window_sums(panel: CasePanel, i: int, config: PipelineConfig) -> tuple[NDArray, NDArray]:
    w, g = config.window, config.gen_time
    c = panel.counts
    num = c[i - w + 1 : i + 1].sum(axis=0)
    den = c[i - g - w + 1 : i - g + 1].sum(axis=0)
    return num, den


def estimate_r0(panel: CasePanel, t: DateLike, config: PipelineConfig | None = None) -> float | None:
    """National ratio of the weekly sum ending at ``t`` to the one ending at
    ``t - gen_time``; ``None`` when the denominator is zero."""
    config = config or PipelineConfig()
    i = panel.index_of(t)
    _check_lags(panel, i, config)
    num, den = _window_sums(panel, i, config)
    n, d = int(num.sum()), int(den.sum())
    if d == 0:
        return None
    return n / d


def district_ratios(panel: CasePanel, t: DateLike, config: PipelineConfig | None = None) -> list[DistrictRatio]:
    """Per-district ratios for districts with a positive denominator.

    Zero-weight districts are left out; their number is
    ``panel.n_districts - len(result)``.
    """
    config = config or PipelineConfig()
    i = panel.index_of(t)
    _check_lags(panel, i, config)
    num, den = _window_sums(panel, i, config)
    return [
        DistrictRatio(k, int(n) / int(d), float(d))
        for k, n, d in zip(panel.districts, num, den)
        if d > 0
    ]


def _var_s(num: NDArray, den: NDArray, r0: float) -> tuple[float | None, int]:
    mask = den > 0
    n_used = int(mask.sum())
    if n_used < 2:
        return None, n_used
    d = den[mask].astype(np.float64)
    ratio = num[mask].astype(np.float64) / d
    return float(np.sum(d * (ratio - r0) ** 2) / n_used), n_used


def estimate_var_s(panel: CasePanel, t: DateLike, config: PipelineConfig | None = None) -> float | None:
    """Weighted dispersion of district ratios around the national ratio,
    ``(1/L) sum_l w_l (R_l - R)^2`` over the L districts with ``w_l > 0``.

    Returns ``None`` with fewer than two usable districts or an undefined
    national ratio.
    """
    config = config or PipelineConfig()
    i = panel.index_of(t)
    _check_lags(panel, i, config)
    r0 = estimate_r0(panel, i, config)
    if r0 is None:
        return None
    num, den = _window_sums(panel, i, config)
    return _var_s(num, den, r0)[0]


def solve_params(r0_hat: float, var_s_scaled: float, p0: ThinningRate | float) -> NegBinParams | Unsolvable:
    """Invert (mean, scaled reported variance) to NB(p, r) for reporting rate ``p0``.

    ``p = r0 p0 / (v - r0 (1 - p0))`` and ``r = r0 p / (1 - p)``.
    """
    p0 = float(p0.p0 if isinstance(p0, ThinningRate) else ThinningRate(p0).p0)
    if not (math.isfinite(r0_hat) and math.isfinite(var_s_scaled)) or r0_hat <= 0 or var_s_scaled <= 0:
        return Unsolvable(f"moments must be finite and positive (r0={r0_hat}, var={var_s_scaled})")
    denom = var_s_scaled - r0_hat * (1.0 - p0)
    if denom <= r0_hat * p0:
        return Unsolvable(
            f"no overdispersion: var_s_scaled={var_s_scaled:.6g} <= r0_hat={r0_hat:.6g}"
        )
    p_hat = r0_hat * p0 / denom
    r_hat = r0_hat * p_hat / (1.0 - p_hat)
    return NegBinParams(p=p_hat, r=r_hat)


def moment_series(panel: CasePanel, config: PipelineConfig) -> tuple[NDArray, NDArray, NDArray]:
    """Raw national ratio, ``var_s_scaled`` and usable-district count for every row
    (NaN where undefined or where lags fall outside the panel)."""
    w, g = config.window, config.gen_time
    W = rolling_sums(panel.counts, w)
    T = panel.n_dates
    r0 = np.full(T, np.nan)
    var = np.full(T, np.nan)
    n_used = np.zeros(T, dtype=np.int64)
    for i in range(g + w - 1, T):
        num, den = W[i], W[i - g]
        n, d = num.sum(), den.sum()
        if d == 0:
            continue
        r0[i] = n / d
        v, n_used[i] = _var_s(num, den, r0[i])
        if v is not None:
            var[i] = v
    return r0, var, n_used


def _opt(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


def run_pipeline(panel: CasePanel, config: PipelineConfig | None = None) -> "EstimateSeries":
    """Estimate NB(p, r) per report date and per p0 in ``config.p0_grid``.

    Both moment series are smoothed with a left-sided moving average of
    length ``window`` before inversion (unless ``smooth_moments`` is off).
    Dates where either moment or the inversion is undefined are kept, with the
    corresponding fields empty.
    """
    config = config or PipelineConfig()
    r0, var, n_used = moment_series(panel, config)
    if config.smooth_moments:
        r0_s, var_s = moving_average(r0, config.window), moving_average(var, config.window)
    else:
        r0_s, var_s = r0, var
    lag = dt.timedelta(days=config.effective_lag)
    records = []
    for i in range(config.gen_time + config.window - 1, panel.n_dates):
        per_p0: dict[float, P0Estimate] = {}
        if math.isfinite(r0_s[i]) and math.isfinite(var_s[i]):
            for p0 in config.p0_grid:
                sol = solve_params(float(r0_s[i]), float(var_s[i]), p0)
                if isinstance(sol, Unsolvable):
                    per_p0[p0] = P0Estimate(p0, None, sol.reason)
                else:
                    per_p0[p0] = P0Estimate(p0, sol)
        records.append(
            EstimateRecord(
                t=panel.dates[i],
                effective_date=panel.dates[i] - lag,
                r0_hat=_opt(r0[i]),
                var_s_scaled=_opt(var[i]),
                r0_smooth=_opt(r0_s[i]),
                var_s_smooth=_opt(var_s[i]),
                n_districts=int(n_used[i]),
                per_p0=per_p0,
            )
        )
    return EstimateSeries(tuple(records), config)


def derived_probabilities(params: NegBinParams) -> tuple[float, float, float]:
    """``P(R = 0)``, ``P(1 <= R <= 5)`` and ``P(R >= 20)``."""
    pmf = nb_pmf(params, np.arange(20))
    return float(pmf[0]), float(pmf[1:6].sum()), float(max(0.0, 1.0 - pmf.sum()))


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


@dataclass(frozen=True)
class EstimateSeries:
    records: tuple[EstimateRecord, ...]
    config: PipelineConfig

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i: int) -> EstimateRecord:
        return self.records[i]

    def at(self, t: dt.date) -> EstimateRecord | None:
        for rec in self.records:
            if rec.t == t:
                return rec
        return None

    def by_date(self) -> dict[dt.date, EstimateRecord]:
        return {rec.t: rec for rec in self.records}

    def params_by_effective_date(self, p0: float) -> dict[dt.date, NegBinParams]:
        out = {}
        for rec in self.records:
            prm = rec.params(p0)
            if prm is not None:
                out[rec.effective_date] = prm
        return out

    def columns(self) -> list[str]:
        cols = ["date", "effective_date", "r0_hat", "var_s_scaled", "r0_smooth", "var_s_smooth", "n_districts"]
        for p0 in self.config.p0_grid:
            cols += [f"p_hat@{p0:g}", f"r_hat@{p0:g}", f"var_r_hat@{p0:g}"]
        return cols

    def rows(self) -> list[list[str]]:
        out = []
        for rec in self.records:
            row = [
                rec.t.isoformat(),
                rec.effective_date.isoformat(),
                _fmt(rec.r0_hat),
                _fmt(rec.var_s_scaled),
                _fmt(rec.r0_smooth),
                _fmt(rec.var_s_smooth),
                str(rec.n_districts),
            ]
            for p0 in self.config.p0_grid:
                est = rec.per_p0.get(p0)
                if est is None or est.params is None:
                    row += ["", "", ""]
                else:
                    row += [_fmt(est.p_hat), _fmt(est.r_hat), _fmt(est.var_r_hat)]
            out.append(row)
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            w.writerows(self.rows())

    def write_json(self, path: str | Path) -> None:
        cols = self.columns()
        data = [dict(zip(cols, row)) for row in self.rows()]
        Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")

    def probability_rows(self) -> tuple[list[str], list[list[str]]]:
        cols = ["date", "effective_date"]
        for p0 in self.config.p0_grid:
            cols += [f"P0@{p0:g}", f"P1to5@{p0:g}", f"P20plus@{p0:g}"]
        rows = []
        for rec in self.records:
            row = [rec.t.isoformat(), rec.effective_date.isoformat()]
            for p0 in self.config.p0_grid:
                prm = rec.params(p0)
                row += ["", "", ""] if prm is None else [_fmt(v) for v in derived_probabilities(prm)]
            rows.append(row)
        return cols, rows


def solvable_records(series: Sequence[EstimateRecord], p0: float) -> list[EstimateRecord]:
    return [rec for rec in series if rec.params(p0) is not None]
