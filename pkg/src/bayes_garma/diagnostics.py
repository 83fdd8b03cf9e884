"""Chain convergence, quantile residuals, normality and forecast accuracy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import BINOMIAL, NEGBIN, CountSeries, ModelSpec, ParamVector, linear_predictor_pass
from .errors import DegenerateChainError, DomainError
from .inference import PosteriorSample

U_EPS = 1e-12


@dataclass(frozen=True)
class GewekeReport:
    z: np.ndarray
    frac_a: float = 0.10
    frac_b: float = 0.50

    @property
    def converged(self) -> np.ndarray:
        return np.abs(self.z) <= 2.0


@dataclass(frozen=True)
class ResidualReport:
    residuals: np.ndarray
    mean: float
    sd: float
    acf: np.ndarray
    ks_statistic: float
    ks_pvalue: float

    def summary(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "ks_statistic": self.ks_statistic,
                "ks_pvalue": self.ks_pvalue, "acf": [float(a) for a in self.acf]}


def spectral_density_zero(x: np.ndarray) -> float:
    """Newey-West (Bartlett) long-run variance with bandwidth floor(sqrt(n))."""
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    bw = int(np.floor(np.sqrt(n)))
    s = d @ d / n
    for lag in range(1, min(bw, n - 1) + 1):
        s += 2.0 * (1.0 - lag / (bw + 1.0)) * (d[lag:] @ d[:-lag]) / n
    return float(s)


def geweke_z(chain, frac_a: float = 0.10, frac_b: float = 0.50) -> float:
    """Difference of early and late segment means in spectral standard errors."""
    chain = np.asarray(chain, dtype=float).ravel()
    if not (0 < frac_a and 0 < frac_b and frac_a + frac_b <= 1):
        raise DomainError("need 0 < frac_a, frac_b and frac_a + frac_b <= 1")
    if chain.size < 100:
        raise DomainError("Geweke diagnostic needs at least 100 draws")
    na = int(np.floor(frac_a * chain.size))
    nb = int(np.floor(frac_b * chain.size))
    a, b = chain[:na], chain[chain.size - nb:]
    sa, sb = spectral_density_zero(a), spectral_density_zero(b)
    if not (sa > 0 and sb > 0):
        raise DegenerateChainError("chain segment has zero variance")
    return float((a.mean() - b.mean()) / np.sqrt(sa / na + sb / nb))


def geweke(draws, frac_a: float = 0.10, frac_b: float = 0.50) -> GewekeReport:
    """Per-parameter Geweke z for a (draws, parameters) matrix."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    z = np.array([geweke_z(draws[:, j], frac_a, frac_b) for j in range(draws.shape[1])])
    return GewekeReport(z=z, frac_a=frac_a, frac_b=frac_b)


def acf(x, max_lag: int) -> np.ndarray:
    """Sample autocorrelations 0..max_lag with the 1/n (biased) normalisation."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size <= max_lag:
        raise DomainError("series must be longer than max_lag")
    d = x - x.mean()
    g0 = d @ d
    if not g0 > 0:
        raise DomainError("acf of a constant series is undefined")
    return np.array([1.0] + [(d[lag:] @ d[:-lag]) / g0 for lag in range(1, max_lag + 1)])


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """Asymptotic Kolmogorov survival function, series truncated at ``terms``."""
    if lam < 0.2:
        # series does not converge at small lambda; the value is 1 to 1e-15
        return 1.0
    k = np.arange(1, terms + 1)
    p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam))
    return float(min(max(p, 0.0), 1.0))


def ks_normality(sample, mean: float, sd: float):
    """One-sample KS test against Normal(mean, sd); returns (D, p-value)."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if not sd > 0:
        raise DomainError("sd must be positive")
    n = x.size
    if n < 8:
        raise DomainError("KS test needs at least 8 observations")
    cdf = stats.norm.cdf((x - mean) / sd)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    return d, kolmogorov_sf(np.sqrt(n) * d)


def family_cdf(spec: ModelSpec, y, mu) -> np.ndarray:
    """Conditional CDF F(y | mu); F(-1) = 0."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    fam = spec.family
    if fam.tag == BINOMIAL:
        out = stats.binom.cdf(y, fam.size, mu / fam.size)
    elif fam.tag == NEGBIN:
        k = fam.dispersion
        out = stats.nbinom.cdf(y, k, k / (k + mu))
    else:
        out = stats.poisson.cdf(y, mu)
    return np.where(y < 0, 0.0, out)


def quantile_residuals(spec: ModelSpec, fitted, series: CountSeries, seed: int = 0,
                       max_lag: int = None) -> ResidualReport:
    """Randomised quantile residuals for t = r+1..n.

    ``fitted`` is a ParamVector or a PosteriorSample (its posterior mean is
    used).  u_t is uniform between F(y_t - 1) and F(y_t) and r_t = Phi^-1(u_t).
    """
    if isinstance(fitted, PosteriorSample):
        params = ParamVector.from_flat(spec, fitted.mean())
    else:
        params = fitted
    state = linear_predictor_pass(spec, params, series)
    r = spec.r
    y = series.y[r:].astype(float)
    mu = state.mu[r:]
    lo = family_cdf(spec, y - 1, mu)
    hi = family_cdf(spec, y, mu)
    rng = np.random.default_rng(seed)
    u = lo + (hi - lo) * rng.uniform(size=y.size)
    clipped = (u < U_EPS) | (u > 1.0 - U_EPS)
    if np.any(clipped):
        warnings.warn(f"{int(clipped.sum())} uniform(s) clamped away from 0/1",
                      RuntimeWarning, stacklevel=2)
        u = np.clip(u, U_EPS, 1.0 - U_EPS)
    res = stats.norm.ppf(u)
    mean = float(res.mean())
    sd = float(res.std(ddof=1))
    lags = max_lag if max_lag is not None else min(40, res.size // 4)
    d, pval = ks_normality(res, mean, sd)
    return ResidualReport(residuals=res, mean=mean, sd=sd, acf=acf(res, lags),
                          ks_statistic=d, ks_pvalue=pval)


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.size != p.size or a.size == 0:
        raise DomainError("actual and predicted need the same non-zero length")
    if np.any(a == 0):
        raise DomainError("MAPE is undefined when an actual value is zero")
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))
