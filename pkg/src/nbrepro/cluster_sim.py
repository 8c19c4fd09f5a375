"""Branching-process simulation of cluster tracing.

Every infected individual causes ``S ~ NB(p, r)`` secondary infections, of
which ``S_obs ~ Binomial(S, p0)`` are eventually reported. If ``S_obs > CS``
the cluster is traced and only ``round(S - C_eff * S_obs)`` of the secondary
cases go on to infect others (half-up rounding, floored at 0).

``run_scenario`` does not loop over individuals. Because the onward count of a
traced individual is ``S - rhd(C_eff * S_obs)`` (``rhd`` = round half down),
the reduction depends on ``S_obs`` alone, so a generation only needs the
histogram of ``S_obs`` (multinomial over the NB(q, r) pmf) and one draw for
the unreported secondaries, ``S - S_obs | S_obs ~ NB(p + p0 - p0 p, r + S_obs)``,
which is additive over individuals.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
from numpy.typing import NDArray
from scipy.stats import nbinom

from .ingest import CasePanel, ConfigError, PipelineConfig, weekly_sum
from .negbin import NegBinParams, ThinningRate, draw_nb, nb_pmf, nb_tail_cutoff, thin_params
from .rng import substream

CHUNK = 1000


def traced_reduction(s_obs: NDArray | int, c_eff: float) -> NDArray[np.int64]:
    """``rhd(C_eff * S_obs)`` so that ``round_half_up(S - C_eff S_obs) = S - rhd(.)``.

    The product is rounded to 9 decimals first so that e.g. 0.35 * 10 counts as
    an exact half.
    """
    c = np.round(c_eff * np.asarray(s_obs, dtype=np.float64), 9)
    return np.ceil(c - 0.5).astype(np.int64)


def simulate_generation(
    cohort: int,
    params: NegBinParams,
    p0: float,
    cs: float,
    c_eff: float,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """One generation, individual by individual.

    Returns ``(next_cohort, reported)``: the onward-infectious secondaries and
    the reported secondaries summed over the cohort.
    """
    if cohort < 0:
        raise ValueError("cohort must be >= 0")
    if cohort == 0:
        return 0, 0
    s = draw_nb(rng, params.p, params.r, size=cohort)
    s_obs = rng.binomial(s, p0)
    traced = s_obs > cs
    onward = s.copy()
    onward[traced] = np.maximum(s[traced] - traced_reduction(s_obs[traced], c_eff), 0)
    return int(onward.sum()), int(s_obs.sum())


@dataclass(frozen=True)
class Scenario:
    """Inputs of a cluster-tracing run.

    ``params_series`` maps infection dates to the NB law of infectors infected
    on that date; generations start at ``start`` and advance by ``gen_time``.
    """

    start: dt.date
    end: dt.date
    params_series: Mapping[dt.date, NegBinParams]
    p0: float
    cs: float = math.inf
    c_eff: float = 0.0
    trials: int = 10_000
    seed: int = 0
    seed_cases: int = 1000
    gen_time: int = 4

    def __post_init__(self) -> None:
        ThinningRate(self.p0)
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0.0 <= self.c_eff <= 1.0:
            raise ConfigError("C_eff must lie in [0, 1]")
        if self.cs < 0:
            raise ConfigError("CS must be >= 0")
        if self.end < self.start:
            raise ConfigError("end date precedes start date")
        if self.seed_cases < 0:
            raise ConfigError("seed_cases must be >= 0")
        if self.gen_time < 1:
            raise ConfigError("gen_time must be >= 1")
        missing = [d for d in self.generation_dates() if d not in self.params_series]
        if missing:
            raise ConfigError(f"no parameters for generation dates {[d.isoformat() for d in missing[:5]]}")

    def generation_dates(self) -> list[dt.date]:
        n = (self.end - self.start).days // self.gen_time + 1
        return [self.start + dt.timedelta(days=k * self.gen_time) for k in range(n)]

    def days(self) -> list[dt.date]:
        n = len(self.generation_dates()) + 1
        return [self.start + dt.timedelta(days=i) for i in range(n * self.gen_time)]


@dataclass(frozen=True)
class TrajectoryFan:
    """Per-day mean and 5%/95% quantiles of reported infections over trials.

    Column ``k`` of ``reported`` holds the reported members of cohort ``k``
    (cohort 0 is the seed); they are spread uniformly over the cohort's
    infection days ``[start + k g, start + (k+1) g)``.
    """

    dates: tuple[dt.date, ...]
    mean: NDArray[np.float64]
    q05: NDArray[np.float64]
    q95: NDArray[np.float64]
    totals: NDArray[np.int64]  # cumulative reported per trial
    cohorts: NDArray[np.int64] = field(repr=False)  # (trials, generations + 1)
    reported: NDArray[np.int64] = field(repr=False)  # (trials, generations + 1)


class _Generation:
    """Precomputed per-generation quantities for the aggregated step."""

    def __init__(self, params: NegBinParams, p0: float, cs: float, c_eff: float):
        thinned = thin_params(params, p0)
        self.r = params.r
        self.q = thinned.p
        self.p_unobs = params.p + p0 - p0 * params.p
        self.c_eff = c_eff
        self.cs = cs
        self.tracing = c_eff > 0 and math.isfinite(cs)
        # categories 0..K-1 are explicit, the last one collects the rare S_obs >= K
        self.K = nb_tail_cutoff(thinned)
        self.k = np.arange(self.K)
        pmf = nb_pmf(thinned, self.k)
        self.pvals = np.append(pmf, max(0.0, 1.0 - pmf.sum()))
        self.pvals /= self.pvals.sum()
        self.reduction = np.where(self.k > cs, traced_reduction(self.k, c_eff), 0)

    def step(self, cohort: NDArray[np.int64], rng: np.random.Generator) -> tuple[NDArray, NDArray]:
        r, q = self.r, self.q
        if not self.tracing:
            reported = draw_nb(rng, q, r * cohort)
            unobs = draw_nb(rng, self.p_unobs, r * cohort + reported)
            return reported + unobs, reported
        counts = rng.multinomial(cohort, self.pvals)
        reported = counts[:, :-1] @ self.k
        reduction = counts[:, :-1] @ self.reduction
        n_tail = counts[:, -1]
        for i in np.nonzero(n_tail)[0]:
            # draw S_obs conditional on S_obs >= K by inversion
            u = rng.uniform(size=int(n_tail[i]))
            sf_k = nbinom.sf(self.K - 1, r, q)
            vals = nbinom.isf(u * sf_k, r, q).astype(np.int64)
            vals = np.maximum(vals, self.K)
            reported[i] += vals.sum()
            reduction[i] += np.where(vals > self.cs, traced_reduction(vals, self.c_eff), 0).sum()
        unobs = draw_nb(rng, self.p_unobs, r * cohort + reported)
        return reported + unobs - reduction, reported


def _simulate_chunk(scn: Scenario, gens: list[_Generation], n: int, chunk: int) -> tuple[NDArray, NDArray]:
    rng = substream(scn.seed, chunk)
    cohorts = np.zeros((n, len(gens) + 1), dtype=np.int64)
    reported = np.zeros((n, len(gens) + 1), dtype=np.int64)
    cohorts[:, 0] = scn.seed_cases
    reported[:, 0] = rng.binomial(scn.seed_cases, scn.p0, size=n)
    for g, gen in enumerate(gens):
        nxt, rep = gen.step(cohorts[:, g], rng)
        cohorts[:, g + 1] = nxt
        reported[:, g + 1] = rep
    return cohorts, reported


def run_scenario(scn: Scenario, threads: int = 1) -> TrajectoryFan:
    """Simulate ``scn.trials`` independent paths and summarize them.

    Trials are split into fixed chunks of ``CHUNK`` with one random substream
    each, so results do not depend on ``threads``.
    """
    gens = [_Generation(scn.params_series[d], scn.p0, scn.cs, scn.c_eff) for d in scn.generation_dates()]
    sizes = [min(CHUNK, scn.trials - s) for s in range(0, scn.trials, CHUNK)]
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda a: _simulate_chunk(scn, gens, *a), zip(sizes, range(len(sizes)))))
    else:
        parts = [_simulate_chunk(scn, gens, n, c) for c, n in enumerate(sizes)]
    cohorts = np.concatenate([p[0] for p in parts])
    reported = np.concatenate([p[1] for p in parts])

    g = scn.gen_time
    days = scn.days()
    daily = np.zeros((scn.trials, len(days)))
    for k in range(reported.shape[1]):
        lo = k * g
        daily[:, lo : lo + g] += reported[:, k : k + 1] / g
    return TrajectoryFan(
        dates=tuple(days),
        mean=daily.mean(axis=0),
        q05=np.quantile(daily, 0.05, axis=0),
        q95=np.quantile(daily, 0.95, axis=0),
        totals=reported.sum(axis=1),
        cohorts=cohorts,
        reported=reported,
    )


def initial_cohort(panel: CasePanel, start: dt.date, p0: float, config: PipelineConfig | None = None) -> int:
    """Infections in the first generation span, from reports one delay later.

    Uses the weekly sum of reports ending ``tau + window - 1`` days after
    ``start``, rescaled to ``gen_time`` days and divided by ``p0``.
    """
    config = config or PipelineConfig()
    t = start + dt.timedelta(days=config.tau + config.window - 1)
    wk = weekly_sum(panel, t, window=config.window)
    return int(round(wk * config.gen_time / config.window / p0))


def write_fans(fan: TrajectoryFan, baseline: TrajectoryFan | None, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["date", "mean", "q05", "q95"]
        if baseline is not None:
            cols += ["baseline_mean", "baseline_q05", "baseline_q95"]
        w.writerow(cols)
        for i, d in enumerate(fan.dates):
            row = [d.isoformat(), repr(float(fan.mean[i])), repr(float(fan.q05[i])), repr(float(fan.q95[i]))]
            if baseline is not None:
                row += [repr(float(baseline.mean[i])), repr(float(baseline.q05[i])), repr(float(baseline.q95[i]))]
            w.writerow(row)


def baseline_of(scn: Scenario) -> Scenario:
    return replace(scn, c_eff=0.0, cs=math.inf)
