"""EBIC, DIC and CPO/LPML model-selection criteria from posterior draws.

All criteria are evaluated on the partial-likelihood window t = start+1..n,
where ``start`` defaults to the model's own r = max(p, q).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .core import CountSeries, ModelSpec, ParamVector, log_partial_likelihood, prepare
from .errors import DivergenceError, DomainError
from .inference import PosteriorSample


@dataclass(frozen=True)
class CriteriaReport:
    ebic: float
    dic: float
    lpml: float
    n_eff: int
    dim: int
    mean_deviance: float = float("nan")
    p_d: float = float("nan")

    def as_dict(self) -> dict:
        return {"ebic": self.ebic, "dic": self.dic, "lpml": self.lpml,
                "n_eff": self.n_eff, "dim": self.dim}


def deviance(spec: ModelSpec, params: ParamVector, series: CountSeries) -> float:
    return -2.0 * log_partial_likelihood(spec, params, series)


def _window(spec: ModelSpec, series: CountSeries, start: Optional[int]) -> int:
    start = spec.r if start is None else int(start)
    if start < spec.r:
        raise DomainError(f"window start {start} precedes the model's r={spec.r}")
    if series.n - start < 1:
        raise DomainError("criteria window is empty")
    return start


def _check_sample(spec: ModelSpec, sample: PosteriorSample) -> np.ndarray:
    draws = np.asarray(sample.draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise DomainError("posterior sample is empty")
    if draws.shape[1] != spec.dim:
        raise DomainError(f"draws have {draws.shape[1]} columns, spec has {spec.dim} parameters")
    return draws


def _draw_logdens(spec, series, sample, start):
    draws = _check_sample(spec, sample)
    start = _window(spec, series, start)
    return prepare(spec, series).logdens(draws, start), draws, start


def _deviance_at(spec, series, values, start):
    ll = prepare(spec, series).logdens(values[None, :], start)[0].sum()
    return -2.0 * ll


def compute_dic(spec: ModelSpec, series: CountSeries, sample: PosteriorSample,
                start: Optional[int] = None) -> float:
    """DIC = 2 * mean deviance - deviance at the posterior mean."""
    dens, draws, start = _draw_logdens(spec, series, sample, start)
    return _dic(spec, series, dens, draws, start)[0]


def dic_value(draw_deviances, deviance_at_mean: float) -> float:
    """2 * mean(D(theta_j)) - D(posterior mean)."""
    return 2.0 * float(np.mean(draw_deviances)) - float(deviance_at_mean)


def ebic_value(mean_deviance: float, dim: int, n_eff: float) -> float:
    """mean(D(theta_j)) + dim * log(n_eff)."""
    return float(mean_deviance) + dim * np.log(n_eff)


def _dic(spec, series, dens, draws, start):
    devs = -2.0 * dens.sum(axis=1)
    dbar = float(np.mean(devs))
    dhat = _deviance_at(spec, series, draws.mean(axis=0), start)
    if not np.isfinite(dhat):
        raise DivergenceError(series.origin + start,
                              "deviance at the posterior mean is not finite")
    return dic_value(devs, dhat), dbar, dbar - dhat


def compute_ebic(spec: ModelSpec, series: CountSeries, sample: PosteriorSample,
                 start: Optional[int] = None) -> float:
    """Posterior-expected BIC: mean deviance + dim * log(n_eff)."""
    dens, _, start = _draw_logdens(spec, series, sample, start)
    dbar = float(np.mean(-2.0 * dens.sum(axis=1)))
    return ebic_value(dbar, spec.dim, series.n - start)


def log_cpo(dens) -> np.ndarray:
    """Harmonic-mean log CPO_t from a (draws, t) matrix of log densities."""
    dens = np.atleast_2d(np.asarray(dens, dtype=float))
    q = dens.shape[0]
    out = -(logsumexp(-dens, axis=0) - np.log(q))
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise DomainError(f"CPO is zero or undefined at window position {bad}")
    return out


def compute_cpo_lpml(spec: ModelSpec, series: CountSeries, sample: PosteriorSample,
                     start: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """Harmonic-mean CPO per observation and their log sum (LPML).

    Returns (lpml, cpo_t); larger LPML is better.
    """
    dens, _, _ = _draw_logdens(spec, series, sample, start)
    lc = log_cpo(dens)
    return float(lc.sum()), np.exp(lc)


def criteria_report(spec: ModelSpec, series: CountSeries, sample: PosteriorSample,
                    start: Optional[int] = None) -> CriteriaReport:
    """All three criteria from a single pass over the draws."""
    dens, draws, start = _draw_logdens(spec, series, sample, start)
    n_eff = series.n - start
    dic, dbar, p_d = _dic(spec, series, dens, draws, start)
    ebic = ebic_value(dbar, spec.dim, n_eff)
    lpml = float(log_cpo(dens).sum())
    return CriteriaReport(ebic=float(ebic), dic=float(dic), lpml=lpml, n_eff=n_eff,
                          dim=spec.dim, mean_deviance=dbar, p_d=float(p_d))


CRITERIA = ("ebic", "dic", "cpo")


def select(reports: Mapping[Tuple[int, int], CriteriaReport]) -> dict:
    """Best (p, q) per criterion: min EBIC, min DIC, max LPML.

    Ties go to the smaller p + q, then the smaller p.
    """
    if not reports:
        raise DomainError("no candidate models")
    orders: Sequence = list(reports)

    def parsimony(o):
        return (o[0] + o[1], o[0])

    return {
        "ebic": min(orders, key=lambda o: (reports[o].ebic, parsimony(o))),
        "dic": min(orders, key=lambda o: (reports[o].dic, parsimony(o))),
        "cpo": min(orders, key=lambda o: (-reports[o].lpml, parsimony(o))),
    }
