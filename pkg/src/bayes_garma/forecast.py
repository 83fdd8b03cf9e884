"""h-step predictive densities, point forecasts and credible intervals.

Each retained draw is run through the recursion over the observed data and
then forward, with future lags of y replaced by that draw's own conditional
mean.  The predictive pmf is the average of the per-draw family pmfs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from . import _kernels
from .core import (BINOMIAL, MEAN_SUBTRACTED, NEGBIN, CountSeries, Family, ModelSpec,
                   clamp_counts, design_matrix, log_density)
from .errors import DivergenceError, DomainError
from .inference import PosteriorSample

PERCENTILE = "percentile"
HPD = "hpd"

MASS_TARGET = 1.0 - 1e-8
Y_MAX_CAP = 10 ** 6


@dataclass(frozen=True)
class ForecastRequest:
    horizon: int = 1
    delta: float = 0.05
    interval_mode: str = PERCENTILE
    future_x: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if not 0.0 < self.delta < 0.5:
            raise DomainError(f"delta must lie in (0, 0.5), got {self.delta}")
        if self.interval_mode not in (PERCENTILE, HPD):
            raise DomainError(f"unknown interval mode {self.interval_mode!r}")
        if self.future_x is not None:
            fx = np.asarray(self.future_x, dtype=float)
            if fx.ndim != 2 or fx.shape[0] != self.horizon or not np.all(np.isfinite(fx)):
                raise DomainError("future_x must be a finite (horizon, k) matrix")
            object.__setattr__(self, "future_x", fx)

    @property
    def level(self) -> float:
        return 1.0 - 2.0 * self.delta


@dataclass(frozen=True)
class PredictiveDensity:
    h: int
    support: np.ndarray
    prob: np.ndarray
    tail_mass_bound: float

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.prob)


@dataclass(frozen=True)
class MeanPaths:
    point: np.ndarray
    per_draw: np.ndarray
    excluded: int = 0


@dataclass(frozen=True)
class ForecastResult:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    densities: List[PredictiveDensity] = field(default_factory=list)
    excluded: int = 0


def future_design(spec: ModelSpec, series: CountSeries, request: ForecastRequest) -> np.ndarray:
    """Covariate rows for t = n+1..n+H, built automatically unless supplied."""
    if request.future_x is not None:
        if request.future_x.shape[1] != spec.n_beta:
            raise DomainError(
                f"future_x has {request.future_x.shape[1]} columns, spec has {spec.n_beta}")
        return request.future_x
    if any(c.kind == "external" for c in spec.covariates):
        raise DomainError("external covariates need future_x for forecasting")
    start = series.origin + series.n
    return design_matrix(spec.covariates, np.arange(start, start + request.horizon))


def forecast_means(spec: ModelSpec, sample: PosteriorSample, series: CountSeries,
                   request: ForecastRequest, max_excluded: float = 0.10) -> MeanPaths:
    """Per-draw conditional means for h = 1..H and their average.

    Diverging draws are dropped; more than ``max_excluded`` of them raises.
    """
    series.check(spec)
    draws = np.ascontiguousarray(sample.draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise DomainError("posterior sample is empty")
    if draws.shape[1] != spec.dim:
        raise DomainError("draws do not match the model dimension")
    x_all = np.ascontiguousarray(np.vstack([series.x, future_design(spec, series, request)]))
    logys = np.log(clamp_counts(series.y, spec.clamp))
    paths = _kernels.forecast_batch(spec.family.code, spec.family.extra, spec.p, spec.q,
                                    spec.predictor_form == MEAN_SUBTRACTED, spec.clamp,
                                    logys, x_all, draws, request.horizon)
    ok = np.all(np.isfinite(paths), axis=1)
    excluded = int(np.sum(~ok))
    if excluded > max_excluded * draws.shape[0]:
        raise DivergenceError(series.origin + series.n,
                              f"{excluded} of {draws.shape[0]} draws diverged while forecasting")
    paths = paths[ok]
    return MeanPaths(point=paths.mean(axis=0), per_draw=paths, excluded=excluded)


def _tail_mass(family: Family, mu: np.ndarray, y_max: int) -> float:
    if family.tag == BINOMIAL:
        sf = stats.binom.sf(y_max, family.size, mu / family.size)
    elif family.tag == NEGBIN:
        k = family.dispersion
        sf = stats.nbinom.sf(y_max, k, k / (k + mu))
    else:
        sf = stats.poisson.sf(y_max, mu)
    return float(np.mean(sf))


def mixture_density(family: Family, mu_draws, h: int = 1, block: int = 128) -> PredictiveDensity:
    """Average of the family pmfs at the given means, enumerated from y = 0.

    Enumeration stops once the cumulative mass reaches 1 - 1e-8 (the full
    support 0..m for binomial); the remaining mass is recorded separately.
    """
    mu = np.asarray(mu_draws, dtype=float).ravel()
    if mu.size == 0:
        raise DomainError("no draws to average")
    if family.tag == BINOMIAL:
        mu = np.clip(mu, np.nextafter(0.0, 1.0), np.nextafter(family.size, 0.0))
        ys = np.arange(family.size + 1)
        prob = np.exp(log_density(family, ys[None, :], mu[:, None])).mean(axis=0)
        return PredictiveDensity(h, ys, prob, 0.0)
    chunks = []
    total = 0.0
    lo = 0
    while total < MASS_TARGET:
        if lo > Y_MAX_CAP:
            raise DomainError(
                f"predictive mass {total:.3g} not reached by y={Y_MAX_CAP}; draws may be divergent")
        ys = np.arange(lo, lo + block)
        p = np.exp(log_density(family, ys[None, :], mu[:, None])).mean(axis=0)
        chunks.append(p)
        total += p.sum()
        lo += block
    prob = np.concatenate(chunks)
    cum = np.cumsum(prob)
    stop = min(int(np.searchsorted(cum, MASS_TARGET)) + 1, prob.size)
    prob = prob[:stop]
    return PredictiveDensity(h, np.arange(stop), prob, _tail_mass(family, mu, stop - 1))


def predictive_density(spec: ModelSpec, sample: PosteriorSample, series: CountSeries, h: int,
                       *, paths: Optional[MeanPaths] = None) -> PredictiveDensity:
    if h < 1:
        raise DomainError("h must be >= 1")
    if paths is None or paths.per_draw.shape[1] < h:
        paths = forecast_means(spec, sample, series, ForecastRequest(horizon=h))
    return mixture_density(spec.family, paths.per_draw[:, h - 1], h)


def credible_interval(density: PredictiveDensity, delta: float, mode: str = PERCENTILE):
    """Integer (lower, upper) bounds at credibility 1 - 2*delta.

    ``percentile`` scans y upward from 0 accumulating mass: the lower bound
    is the first y whose cumulative mass reaches delta, the upper bound the
    first y whose cumulative mass reaches 1 - delta.  ``hpd`` takes support
    points in decreasing probability until the mass reaches 1 - 2*delta and
    reports the smallest and largest of them.
    """
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 0.5), got {delta}")
    support, prob = density.support, density.prob
    if mode == PERCENTILE:
        lower = upper = None
        s = 0.0
        for y, p in zip(support, prob):
            s += p
            if lower is None and s >= delta:
                lower = int(y)
            if upper is None and s >= 1.0 - delta:
                upper = int(y)
                break
        if upper is None:
            upper = int(support[-1])
        if lower is None:
            lower = upper
        return lower, upper
    if mode == HPD:
        order = np.argsort(-prob, kind="stable")
        mass = np.cumsum(prob[order])
        count = int(np.searchsorted(mass, 1.0 - 2.0 * delta)) + 1
        chosen = support[order[:min(count, order.size)]]
        return int(chosen.min()), int(chosen.max())
    raise DomainError(f"unknown interval mode {mode!r}")


def forecast(spec: ModelSpec, sample: PosteriorSample, series: CountSeries,
             request: ForecastRequest) -> ForecastResult:
    paths = forecast_means(spec, sample, series, request)
    densities, lower, upper = [], [], []
    for h in range(1, request.horizon + 1):
        dens = mixture_density(spec.family, paths.per_draw[:, h - 1], h)
        lo, hi = credible_interval(dens, request.delta, request.interval_mode)
        densities.append(dens)
        lower.append(lo)
        upper.append(hi)
    return ForecastResult(point=paths.point, lower=np.array(lower), upper=np.array(upper),
                          densities=densities, excluded=paths.excluded)
