"""Priors, posterior evaluation, mode finding and the independence sampler."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg, optimize

from .core import CountSeries, ModelSpec, ParamVector, log_partial_likelihood, prepare
from .errors import ConvergenceError, DivergenceError, DomainError, HessianError, SamplerError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PriorSpec:
    """Independent Gaussian blocks for beta, phi and theta.

    Means may be scalars (broadcast to the block length) or vectors.
    """

    mean_beta: object = 0.0
    var_beta: float = 200.0
    mean_phi: object = 0.0
    var_phi: float = 200.0
    mean_theta: object = 0.0
    var_theta: float = 200.0

    def __post_init__(self):
        for name in ("var_beta", "var_phi", "var_theta"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise DomainError(f"{name} must be positive, got {v}")

    def moments(self, n_beta: int, p: int, q: int):
        """Flat prior mean and per-coordinate variance vectors."""
        means, variances = [], []
        for mean, var, size, label in (
                (self.mean_beta, self.var_beta, n_beta, "beta"),
                (self.mean_phi, self.var_phi, p, "phi"),
                (self.mean_theta, self.var_theta, q, "theta")):
            m = np.asarray(mean, dtype=float)
            if m.ndim == 0:
                m = np.full(size, float(m))
            if m.shape != (size,):
                raise DomainError(f"prior mean for {label} has length {m.size}, expected {size}")
            means.append(m)
            variances.append(np.full(size, float(var)))
        return np.concatenate(means), np.concatenate(variances)


@dataclass(frozen=True)
class McmcConfig:
    """Sampler settings.

    ``iterations`` counts post-burn-in proposals; every ``thin``-th state is
    kept, so the retained sample has ``iterations // thin`` draws.
    """

    iterations: int = 15000
    burn_in: int = 1000
    thin: int = 3
    seed: int = 0
    proposal_scale: float = 1.0

    def __post_init__(self):
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if self.iterations < self.thin:
            raise DomainError("iterations must be >= thin")
        if self.burn_in < 0:
            raise DomainError("burn_in must be >= 0")
        if not self.proposal_scale > 0:
            raise DomainError("proposal_scale must be positive")

    @property
    def retained(self) -> int:
        return self.iterations // self.thin


@dataclass(frozen=True)
class PosteriorSample:
    draws: np.ndarray
    accept_count: int
    proposals: int
    map_estimate: np.ndarray
    proposal_cov: np.ndarray
    names: tuple = ()

    @property
    def Q(self) -> int:
        return self.draws.shape[0]

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)


def log_prior(prior: PriorSpec, params: ParamVector) -> float:
    """Gaussian log prior density including normalising constants."""
    mean, var = prior.moments(params.beta.size, params.phi.size, params.theta.size)
    return float(_log_prior_flat(mean, var, params.flat()[None, :])[0])


def _log_prior_flat(mean, var, values):
    z = values - mean
    return -0.5 * (np.sum(z * z / var, axis=1) + np.sum(np.log(var)) + mean.size * LOG_2PI)


class Posterior:
    """Vectorised log posterior over flat parameter rows for one (spec, series)."""

    def __init__(self, spec: ModelSpec, prior: PriorSpec, series: CountSeries):
        self.spec = spec
        self.prior = prior
        self.series = series
        self._prep = prepare(spec, series)
        self.prior_mean, self.prior_var = prior.moments(spec.n_beta, spec.p, spec.q)

    @property
    def dim(self) -> int:
        return self.spec.dim

    def loglik(self, values) -> np.ndarray:
        return self._prep.loglik(values)

    def logdens(self, values, start=None) -> np.ndarray:
        return self._prep.logdens(values, self.spec.r if start is None else start)

    def __call__(self, values) -> np.ndarray:
        values = np.atleast_2d(np.asarray(values, dtype=float))
        out = self.loglik(values) + _log_prior_flat(self.prior_mean, self.prior_var, values)
        out[np.isnan(out)] = -np.inf
        return out


def log_posterior(spec: ModelSpec, prior: PriorSpec, params: ParamVector,
                  series: CountSeries) -> float:
    """Partial log-likelihood plus log prior; -inf where the recursion diverges."""
    params.check(spec)
    try:
        loglik = log_partial_likelihood(spec, params, series)
    except DivergenceError:
        return -np.inf
    return loglik + log_prior(prior, params)


def central_gradient(f: Callable, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = step * np.maximum(1.0, np.abs(x))
    pts = np.concatenate([x + np.diag(h), x - np.diag(h)])
    vals = f(pts)
    d = x.size
    return (vals[:d] - vals[d:]) / (2.0 * h)


def central_hessian(f: Callable, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Second derivatives of a vectorised scalar function by central differences.

    Diagonal entries use the three-point rule and off-diagonal entries the
    four-point cross rule; the result is symmetrised.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    h = step * np.maximum(1.0, np.abs(x))
    eye = np.diag(h)
    pts = [x]
    for i in range(d):
        pts += [x + eye[i], x - eye[i]]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    for i, j in pairs:
        pts += [x + eye[i] + eye[j], x + eye[i] - eye[j],
                x - eye[i] + eye[j], x - eye[i] - eye[j]]
    vals = f(np.array(pts))
    f0 = vals[0]
    hess = np.empty((d, d))
    for i in range(d):
        hess[i, i] = (vals[1 + 2 * i] - 2.0 * f0 + vals[2 + 2 * i]) / h[i] ** 2
    base = 1 + 2 * d
    for k, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = vals[base + 4 * k: base + 4 * k + 4]
        hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4.0 * h[i] * h[j])
    return 0.5 * (hess + hess.T)


def regularize_precision(precision: np.ndarray, max_doublings: int = 60):
    """Add a ridge eps*I (eps = 1e-6 * max diag, doubled) until Cholesky succeeds.

    Returns the possibly-ridged matrix and the ridge used (0.0 if none).
    """
    precision = 0.5 * (precision + precision.T)
    try:
        linalg.cholesky(precision, lower=True)
        return precision, 0.0
    except linalg.LinAlgError:
        pass
    eps = 1e-6 * max(float(np.max(np.abs(np.diag(precision)))), 1e-12)
    for _ in range(max_doublings):
        ridged = precision + eps * np.eye(precision.shape[0])
        try:
            linalg.cholesky(ridged, lower=True)
            return ridged, eps
        except linalg.LinAlgError:
            eps *= 2.0
    raise HessianError("could not regularise the Hessian", hessian=precision)


def _maximize(logpost: Callable, start: np.ndarray, gtol: float):
    """Trust-region Newton on finite-difference derivatives, BFGS as backup."""

    def fun(v):
        val = logpost(v[None, :])[0]
        return np.inf if not np.isfinite(val) else -val

    def jac(v):
        return -central_gradient(logpost, v)

    def hess(v):
        return -central_hessian(logpost, v)

    with np.errstate(invalid="ignore", over="ignore"):
        best = None
        x = np.asarray(start, dtype=float)
        for method in ("trust-exact", "BFGS", "trust-exact"):
            kw = {"hess": hess} if method == "trust-exact" else {}
            try:
                res = optimize.minimize(fun, x, jac=jac, method=method,
                                        options={"gtol": gtol, "maxiter": 500}, **kw)
            except (ValueError, np.linalg.LinAlgError):
                continue
            if not np.isfinite(res.fun):
                continue
            g = float(np.max(np.abs(central_gradient(logpost, res.x))))
            if best is None or res.fun < best[1] - 1e-9 or (res.fun <= best[1] + 1e-9 and g < best[2]):
                best = (res.x, float(res.fun), g)
            x = best[0]
            if best[2] < gtol:
                break
    if best is None:
        return x, -np.inf, np.inf
    return best[0], -best[1], best[2]


def find_mode_and_hessian(spec: ModelSpec, prior: PriorSpec, series: CountSeries,
                          init: Optional[ParamVector] = None, *, gtol: float = 1e-6,
                          ridge_fallback: bool = True, posterior: Optional[Posterior] = None):
    """Maximise the log posterior and return (mode, negative Hessian at the mode).

    Starts are ``init`` (if given), the prior mean and the zero vector; the
    best converged optimum wins.  A non positive-definite Hessian is ridged
    (with a warning) when ``ridge_fallback`` is set, otherwise it raises.
    """
    post = posterior if posterior is not None else Posterior(spec, prior, series)
    starts = []
    if init is not None:
        init.check(spec)
        starts.append(init.flat())
    for s in (post.prior_mean.copy(), np.zeros(spec.dim)):
        if not any(np.array_equal(s, o) for o in starts):
            starts.append(s)
    best = None
    for s in starts:
        if not np.isfinite(post(s)[0]):
            continue
        try:
            x, val, gnorm = _maximize(post, s, gtol)
        except (ValueError, FloatingPointError) as exc:
            logger.debug("optimizer start %s failed: %s", s, exc)
            continue
        if best is None or val > best[1]:
            best = (x, val, gnorm)
    if best is None:
        raise ConvergenceError("no starting point gave a finite log posterior")
    x, val, gnorm = best
    scale = max(1.0, abs(val))
    if gnorm > max(gtol, 1e-6 * scale):
        raise ConvergenceError(
            f"optimizer stopped with gradient max-norm {gnorm:.3g}",
            best=ParamVector.from_flat(spec, x))
    hess = -central_hessian(post, x)
    try:
        linalg.cholesky(hess, lower=True)
    except linalg.LinAlgError:
        if not ridge_fallback:
            raise HessianError("negative Hessian at the mode is not positive definite",
                               hessian=hess)
        hess, eps = regularize_precision(hess)
        warnings.warn(f"Hessian not positive definite; added ridge {eps:.3g}",
                      RuntimeWarning, stacklevel=2)
    return ParamVector.from_flat(spec, x), hess


def independence_mh(log_target: Callable, mean: np.ndarray, cov: np.ndarray,
                    mcmc: McmcConfig, rng: Optional[np.random.Generator] = None,
                    start: Optional[np.ndarray] = None):
    """Independence Metropolis-Hastings with a fixed Gaussian proposal.

    ``log_target`` maps an (N, d) array to N log densities.  Because proposals
    do not depend on the state they are drawn and scored in one batch; the
    accept/reject pass then uses the importance weights log pi - log q.

    Returns (draws, accept_count, proposals) where only post-burn-in
    proposals are counted.
    """
    if rng is None:
        rng = np.random.default_rng(mcmc.seed)
    mean = np.asarray(mean, dtype=float)
    d = mean.size
    chol = linalg.cholesky(np.asarray(cov, dtype=float), lower=True)
    total = mcmc.burn_in + mcmc.iterations
    z = rng.standard_normal((total, d))
    props = mean + z @ chol.T
    log_u = np.log(rng.uniform(size=total))
    log_q_const = -np.sum(np.log(np.diag(chol))) - 0.5 * d * LOG_2PI
    w_prop = log_target(props) - (log_q_const - 0.5 * np.sum(z * z, axis=1))

    cur = mean.copy() if start is None else np.asarray(start, dtype=float)
    zc = linalg.solve_triangular(chol, cur - mean, lower=True)
    w_cur = log_target(cur[None, :])[0] - (log_q_const - 0.5 * zc @ zc)
    if not np.isfinite(w_cur):
        raise SamplerError("log target is not finite at the starting point")

    keep = np.empty((mcmc.retained, d))
    accepted = 0
    kept = 0
    for i in range(total):
        w = w_prop[i]
        if w - w_cur >= log_u[i]:
            cur = props[i]
            w_cur = w
            if i >= mcmc.burn_in:
                accepted += 1
        j = i - mcmc.burn_in + 1
        if j > 0 and j % mcmc.thin == 0 and kept < keep.shape[0]:
            keep[kept] = cur
            kept += 1
    return keep, accepted, mcmc.iterations


def mh_sample(spec: ModelSpec, prior: PriorSpec, series: CountSeries, mcmc: McmcConfig,
              *, init: Optional[ParamVector] = None, strict: bool = False) -> PosteriorSample:
    """Fit by block independence MH centred at the posterior mode.

    Proposals are N(mode, proposal_scale * H^-1) with H the negative Hessian
    of the log posterior at the mode.  With ``strict`` a chain that accepts
    nothing after burn-in raises instead of only warning.
    """
    post = Posterior(spec, prior, series)
    mode, hess = find_mode_and_hessian(spec, prior, series, init, posterior=post)
    cov = mcmc.proposal_scale * linalg.inv(hess)
    cov = 0.5 * (cov + cov.T)
    rng = np.random.default_rng(mcmc.seed)
    draws, accepted, proposals = independence_mh(post, mode.flat(), cov, mcmc, rng)
    if accepted == 0:
        msg = "no proposals accepted after burn-in; try a different proposal_scale"
        if strict:
            raise SamplerError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return PosteriorSample(draws=draws, accept_count=accepted, proposals=proposals,
                           map_estimate=mode.flat(), proposal_cov=cov,
                           names=tuple(spec.param_names()))


def acceptance_rate(sample: PosteriorSample) -> float:
    if sample.proposals <= 0:
        raise DomainError("sample records no proposals")
    return sample.accept_count / sample.proposals
