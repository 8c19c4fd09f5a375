"""Generalized Negative Binomial law NB(p, r) as a Gamma-Poisson mixture.

Parameterization: ``R ~ NB(p, r)`` means ``R | lam ~ Poisson(lam)`` with
``lam ~ Gamma(shape=r, rate=p / (1 - p))``, so that

    E(R) = r (1 - p) / p,    Var(R) = r (1 - p) / p**2.

``r`` may be any positive real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from .rng import SeedLike, make_rng


class ParameterDomainError(ValueError):
    """Raised when distribution parameters leave their admissible domain."""


@dataclass(frozen=True)
class NegBinParams:
    """Parameters (p, r) of NB(p, r) with 0 < p < 1 and r > 0."""

    p: float
    r: float

    def __post_init__(self) -> None:
        p, r = float(self.p), float(self.r)
        if not (0.0 < p < 1.0) or not math.isfinite(p):
            raise ParameterDomainError(f"p must lie in (0, 1), got {self.p!r}")
        if not (r > 0.0) or not math.isfinite(r):
            raise ParameterDomainError(f"r must be positive and finite, got {self.r!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_mean_dispersion(cls, mean: float, kappa: float) -> "NegBinParams":
        """Build the law with ``E(R) = mean`` and dispersion ``kappa`` (= r)."""
        return cls(p=kappa / (kappa + mean), r=kappa)

    @property
    def mean(self) -> float:
        return self.r * (1.0 - self.p) / self.p

    @property
    def variance(self) -> float:
        return self.r * (1.0 - self.p) / self.p**2

    @property
    def kappa(self) -> float:
        """Dispersion parameter in ``Var = R0 (1 + R0 / kappa)``; equals ``r``."""
        return self.r

    @property
    def cv(self) -> float:
        """Variance-to-mean ratio ``Var(R) / E(R) = 1 / p``."""
        return 1.0 / self.p


@dataclass(frozen=True)
class ThinningRate:
    """Probability ``p0`` in (0, 1] that an infection is ever reported."""

    p0: float

    def __post_init__(self) -> None:
        p0 = float(self.p0)
        if not (0.0 < p0 <= 1.0):
            raise ParameterDomainError(f"p0 must lie in (0, 1], got {self.p0!r}")
        object.__setattr__(self, "p0", p0)

    def __float__(self) -> float:
        return self.p0


def _as_rate(rate: ThinningRate | float) -> float:
    if isinstance(rate, ThinningRate):
        return rate.p0
    return ThinningRate(rate).p0


def nb_logpmf(params: NegBinParams, k: ArrayLike) -> NDArray[np.float64] | float:
    """Log of ``P(R = k)``, computed with log-gamma functions."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr != np.floor(k_arr)):
        raise ParameterDomainError("k must be a non-negative integer")
    kf = k_arr.astype(np.float64)
    p, r = params.p, params.r
    out = (
        gammaln(kf + r)
        - gammaln(r)
        - gammaln(kf + 1.0)
        + r * math.log(p)
        + kf * math.log1p(-p)
    )
    return float(out) if out.ndim == 0 else out


def nb_pmf(params: NegBinParams, k: ArrayLike) -> NDArray[np.float64] | float:
    """``P(R = k)`` for scalar or array ``k``."""
    lp = nb_logpmf(params, k)
    return math.exp(lp) if isinstance(lp, float) else np.exp(lp)


def nb_cdf(params: NegBinParams, k: int) -> float:
    """``P(R <= k)`` by direct summation of the pmf."""
    if k < 0:
        return 0.0
    return float(min(1.0, np.sum(nb_pmf(params, np.arange(k + 1)))))


def nb_moments(params: NegBinParams) -> tuple[float, float]:
    return params.mean, params.variance


def dispersion_kappa(params: NegBinParams) -> float:
    return params.kappa


def cv_ratio(mean: float, kappa: float, kappa_other: float) -> float:
    """``CV(R_other) / CV(R)`` for two laws with common mean and dispersions
    ``kappa`` and ``kappa_other``; decreasing in ``kappa_other``."""
    return kappa * (mean + kappa_other) / (kappa_other * (mean + kappa))


def thin_params(params: NegBinParams, rate: ThinningRate | float) -> NegBinParams:
    """Law of ``sum_{j<=R} Z_j`` with ``Z_j ~ Bernoulli(p0)``: NB(q, r) with
    ``q = p / (p0 + p - p0 p)``."""
    p0 = _as_rate(rate)
    p = params.p
    return NegBinParams(p=p / (p0 + p - p0 * p), r=params.r)


def nb_additive(params: NegBinParams, m: float) -> NegBinParams:
    """Law of the sum of ``m`` independent NB(p, r) variables (``m`` real)."""
    if not m > 0:
        raise ParameterDomainError(f"aggregation count must be positive, got {m!r}")
    return NegBinParams(p=params.p, r=params.r * m)


def draw_nb(
    rng: np.random.Generator,
    p: ArrayLike,
    r: ArrayLike,
    size: int | tuple[int, ...] | None = None,
) -> NDArray[np.int64]:
    """Vectorized Gamma -> Poisson draws; ``p`` and ``r`` broadcast."""
    p = np.asarray(p, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    lam = rng.gamma(shape=r, scale=(1.0 - p) / p, size=size)
    return rng.poisson(lam)


def nb_sample(params: NegBinParams, n: int, seed: SeedLike = None) -> NDArray[np.int64]:
    """``n`` i.i.d. draws from ``params``; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    return draw_nb(rng, params.p, params.r, size=n)


def nb_tail_cutoff(params: NegBinParams, eps: float = 1e-15) -> int:
    """Smallest ``K`` with ``P(R >= K) < eps``."""
    k_max = int(params.mean + 60.0 * math.sqrt(params.variance) + 100)
    while True:
        cdf = np.cumsum(nb_pmf(params, np.arange(k_max + 1)))
        hits = np.nonzero(1.0 - cdf < eps)[0]
        if hits.size:
            return int(hits[0] + 1)
        k_max *= 2
