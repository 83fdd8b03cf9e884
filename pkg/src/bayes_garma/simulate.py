"""Synthetic GARMA(p, q) count series from known parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (BINOMIAL, MEAN_SUBTRACTED, NEGBIN, CountSeries, ModelSpec, ParamVector,
                   design_matrix)
from .errors import DivergenceError, DomainError


@dataclass(frozen=True)
class SimConfig:
    spec: ModelSpec
    params: ParamVector
    n: int
    burn_in_sim: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.burn_in_sim < 0:
            raise DomainError("burn_in_sim must be >= 0")
        self.params.check(self.spec)
        if any(c.kind == "external" for c in self.spec.covariates):
            raise DomainError("external covariates cannot be simulated")


def _draw(rng: np.random.Generator, spec: ModelSpec, mu: float) -> int:
    fam = spec.family
    if fam.tag == NEGBIN:
        k = fam.dispersion
        return int(rng.poisson(rng.gamma(k, mu / k)))
    if fam.tag == BINOMIAL:
        return int(rng.binomial(fam.size, min(mu / fam.size, 1.0)))
    return int(rng.poisson(mu))


def simulate_series(cfg: SimConfig) -> CountSeries:
    """Generate y_1..y_n after discarding ``burn_in_sim`` warm-up points.

    Covariates are evaluated on the time index of the whole generated run,
    so the returned series starts at ``origin = burn_in_sim + 1``.
    """
    spec, prm = cfg.spec, cfg.params
    total = cfg.burn_in_sim + cfg.n
    x = design_matrix(spec.covariates, np.arange(1, total + 1))
    xb = x @ prm.beta if spec.n_beta else np.zeros(total)
    rng = np.random.default_rng(cfg.seed)
    c = spec.clamp
    demean = spec.predictor_form == MEAN_SUBTRACTED
    binom = spec.family.tag == BINOMIAL
    m = spec.family.size
    r = spec.r

    y = np.zeros(total, dtype=np.int64)
    logys = np.zeros(total)
    innov = np.zeros(total)
    for t in range(total):
        eta = xb[t]
        if t >= r:
            for j in range(1, spec.p + 1):
                a = logys[t - j] - (xb[t - j] if demean else 0.0)
                eta += prm.phi[j - 1] * a
            for j in range(1, spec.q + 1):
                eta += prm.theta[j - 1] * innov[t - j]
        if binom:
            logmu = math.log(m) - np.logaddexp(0.0, -eta) if math.isfinite(eta) else eta
        else:
            logmu = eta
        mu = math.exp(logmu) if math.isfinite(logmu) and logmu < 700 else math.inf
        if not (math.isfinite(eta) and math.isfinite(mu) and mu < 1e15):
            raise DivergenceError(
                t + 1 - cfg.burn_in_sim,
                f"simulated mean diverged at t={t + 1 - cfg.burn_in_sim} "
                "(relative to the retained series); try smaller AR/MA coefficients")
        y[t] = _draw(rng, spec, mu)
        logys[t] = math.log(max(y[t], c))
        if t >= r:
            innov[t] = logys[t] - logmu
    keep = slice(cfg.burn_in_sim, total)
    return CountSeries(y[keep], x[keep], origin=cfg.burn_in_sim + 1)
