"""Synthetic district panels from the branching model with thinned reporting.

Each day's reported count in a district is the reported offspring of the
cohort infected one generation earlier. With the cohort size taken as
``reported / p0``, aggregation and thinning give

    RKI[d] ~ NB(q, r * RKI[d - g] / p0),   q = p / (p0 + p - p0 p),

which is the observation law the estimators are built on.
"""

from __future__ import annotations

import datetime as dt
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from .ingest import CasePanel
from .negbin import NegBinParams, draw_nb, thin_params
from .rng import SeedLike, make_rng

ParamsSource = NegBinParams | Callable[[int], NegBinParams]


def synthetic_panel(
    params: ParamsSource,
    p0: float,
    n_districts: int = 400,
    n_days: int = 60,
    initial_level: float | ArrayLike = 200.0,
    gen_time: int = 4,
    start: dt.date = dt.date(2020, 4, 1),
    seed: SeedLike = None,
) -> CasePanel:
    """Simulate ``n_days`` of daily reported counts for ``n_districts``.

    The first ``gen_time`` days are Poisson around ``initial_level`` (a scalar
    or one level per district). ``params`` is either fixed or a function of
    the row index of the day being generated.
    """
    rng = make_rng(seed)
    level = np.broadcast_to(np.asarray(initial_level, dtype=np.float64), (n_districts,))
    counts = np.zeros((n_days, n_districts), dtype=np.int64)
    counts[: min(gen_time, n_days)] = rng.poisson(level, size=(min(gen_time, n_days), n_districts))
    for d in range(gen_time, n_days):
        prm = params(d) if callable(params) else params
        q = thin_params(prm, p0).p
        shape = prm.r * counts[d - gen_time] / p0
        counts[d] = draw_nb(rng, q, shape)
    dates = tuple(start + dt.timedelta(days=i) for i in range(n_days))
    districts = tuple(f"D{j:04d}" for j in range(n_districts))
    return CasePanel(dates, districts, counts)
