"""Families, links, covariate design and the GARMA linear-predictor recursion.

The conditional mean of y_t given the past is linked to a linear predictor

    eta_t = x_t' beta + sum_j phi_j * log(y*_{t-j})
                      + sum_j theta_j * (log(y*_{t-j}) - log(mu_{t-j}))

with y* = max(y, c).  The ``mean-subtracted`` form replaces the AR term by
phi_j * (log(y*_{t-j}) - x_{t-j}' beta).  For t <= r = max(p, q) the predictor
is seeded with x_t' beta and the MA innovations are zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, gammaln

from . import _kernels
from .errors import DivergenceError, DomainError

POISSON = "poisson"
BINOMIAL = "binomial"
NEGBIN = "negbin"

LITERAL = "paper-literal"
MEAN_SUBTRACTED = "mean-subtracted"

_FAMILY_CODES = {POISSON: _kernels.POISSON, BINOMIAL: _kernels.BINOMIAL,
                 NEGBIN: _kernels.NEGBIN}


@dataclass(frozen=True)
class Family:
    """Conditional count distribution.

    ``size`` is the number of binomial trials m and ``dispersion`` the
    negative-binomial k; each is set only for its own family.
    """

    tag: str
    size: Optional[int] = None
    dispersion: Optional[float] = None

    def __post_init__(self):
        if self.tag not in _FAMILY_CODES:
            raise DomainError(f"unknown family {self.tag!r}")
        if (self.size is not None) != (self.tag == BINOMIAL):
            raise DomainError("size m is required for, and only for, the binomial family")
        if (self.dispersion is not None) != (self.tag == NEGBIN):
            raise DomainError(
                "dispersion k is required for, and only for, the negative binomial family")
        if self.size is not None and (int(self.size) != self.size or self.size < 1):
            raise DomainError(f"binomial size must be a positive integer, got {self.size}")
        if self.dispersion is not None and not (self.dispersion > 0 and math.isfinite(self.dispersion)):
            raise DomainError(f"dispersion k must be positive, got {self.dispersion}")

    @classmethod
    def poisson(cls) -> "Family":
        return cls(POISSON)

    @classmethod
    def binomial(cls, m: int) -> "Family":
        return cls(BINOMIAL, size=int(m))

    @classmethod
    def negative_binomial(cls, k: float) -> "Family":
        return cls(NEGBIN, dispersion=float(k))

    @property
    def code(self) -> int:
        return _FAMILY_CODES[self.tag]

    @property
    def extra(self) -> float:
        if self.tag == BINOMIAL:
            return float(self.size)
        if self.tag == NEGBIN:
            return float(self.dispersion)
        return 0.0

    def __str__(self):
        if self.tag == BINOMIAL:
            return f"binomial(m={self.size})"
        if self.tag == NEGBIN:
            return f"negbin(k={self.dispersion:g})"
        return "poisson"


@dataclass(frozen=True)
class Covariate:
    """One column of the regression design.

    kind is one of ``intercept``, ``log_trend``, ``cos``, ``sin`` or
    ``external``; seasonal kinds need ``period`` and external ones ``column``.
    """

    kind: str
    period: Optional[int] = None
    column: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("intercept", "log_trend", "cos", "sin", "external"):
            raise DomainError(f"unknown covariate kind {self.kind!r}")
        if self.kind in ("cos", "sin"):
            if self.period is None or self.period < 2:
                raise DomainError("seasonal covariates need an integer period >= 2")
        if self.kind == "external" and not self.column:
            raise DomainError("external covariates need a column name")

    @property
    def name(self) -> str:
        if self.kind == "intercept":
            return "beta0"
        if self.kind == "log_trend":
            return "beta_exp"
        if self.kind in ("cos", "sin"):
            return f"beta_{self.kind}{self.period}"
        return f"beta_{self.column}"

    def values(self, t: np.ndarray, external=None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "intercept":
            return np.ones_like(t)
        if self.kind == "log_trend":
            return np.log(t)
        if self.kind == "cos":
            return np.cos(2.0 * np.pi * t / self.period)
        if self.kind == "sin":
            return np.sin(2.0 * np.pi * t / self.period)
        if external is None or self.column not in external:
            raise DomainError(f"external covariate column {self.column!r} not supplied")
        col = np.asarray(external[self.column], dtype=float)
        if col.shape != t.shape:
            raise DomainError(
                f"external column {self.column!r} has {col.size} values, expected {t.size}")
        return col


INTERCEPT = Covariate("intercept")


def design_matrix(covariates: Sequence[Covariate], t, external=None) -> np.ndarray:
    """Stack covariate columns evaluated at time indices ``t`` (1-based)."""
    t = np.asarray(t, dtype=float)
    if not covariates:
        return np.zeros((t.size, 0))
    x = np.column_stack([c.values(t, external) for c in covariates])
    if not np.all(np.isfinite(x)):
        raise DomainError("design matrix has non-finite entries")
    return x


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    p: int = 0
    q: int = 0
    covariates: tuple = (INTERCEPT,)
    clamp: float = 0.1
    predictor_form: str = LITERAL

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.p < 0 or self.q < 0:
            raise DomainError("ARMA orders must be non-negative")
        if self.p + self.q + len(self.covariates) < 1:
            raise DomainError("model has no parameters")
        if not 0.0 < self.clamp < 1.0:
            raise DomainError(f"clamp c must lie in (0, 1), got {self.clamp}")
        if self.predictor_form not in (LITERAL, MEAN_SUBTRACTED):
            raise DomainError(f"unknown predictor form {self.predictor_form!r}")

    @property
    def r(self) -> int:
        return max(self.p, self.q)

    @property
    def n_beta(self) -> int:
        return len(self.covariates)

    @property
    def dim(self) -> int:
        return self.n_beta + self.p + self.q

    def param_names(self) -> list:
        names = [c.name for c in self.covariates]
        names += [f"phi{j}" for j in range(1, self.p + 1)]
        names += [f"theta{j}" for j in range(1, self.q + 1)]
        return names

    def with_order(self, p: int, q: int) -> "ModelSpec":
        return ModelSpec(self.family, p, q, self.covariates, self.clamp, self.predictor_form)


@dataclass(frozen=True)
class ParamVector:
    """Regression, AR and MA coefficients; flat order is beta, phi, theta."""

    beta: np.ndarray
    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("beta", "phi", "theta"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.phi, self.theta])

    @classmethod
    def from_flat(cls, spec: ModelSpec, values) -> "ParamVector":
        v = np.asarray(values, dtype=float)
        if v.shape != (spec.dim,):
            raise DomainError(f"expected {spec.dim} parameters, got shape {v.shape}")
        nb, p = spec.n_beta, spec.p
        return cls(v[:nb], v[nb:nb + p], v[nb + p:])

    def check(self, spec: ModelSpec) -> None:
        if (self.beta.size, self.phi.size, self.theta.size) != (spec.n_beta, spec.p, spec.q):
            raise DomainError(
                f"parameter lengths ({self.beta.size}, {self.phi.size}, {self.theta.size}) "
                f"do not match spec ({spec.n_beta}, {spec.p}, {spec.q})")


@dataclass(frozen=True)
class CountSeries:
    """Observed counts with their covariate matrix; ``origin`` is the time index of y[0]."""

    y: np.ndarray
    x: np.ndarray
    origin: int = 1

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise DomainError("y must be one-dimensional")
        if y.size and (np.any(y < 0) or np.any(y != np.round(y))):
            raise DomainError("counts must be non-negative integers")
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or x.shape[0] != y.size:
            raise DomainError(f"x must have shape ({y.size}, k), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("x has non-finite entries")
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "x", np.ascontiguousarray(x))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.origin, self.origin + self.n)

    @classmethod
    def build(cls, y, covariates: Sequence[Covariate] = (INTERCEPT,), origin: int = 1,
              external=None) -> "CountSeries":
        y = np.asarray(y)
        t = np.arange(origin, origin + y.size)
        return cls(y, design_matrix(covariates, t, external), origin)

    def check(self, spec: ModelSpec) -> None:
        if self.x.shape[1] != spec.n_beta:
            raise DomainError(
                f"series has {self.x.shape[1]} covariate columns, spec expects {spec.n_beta}")
        if spec.family.tag == BINOMIAL and np.any(self.y > spec.family.size):
            raise DomainError(f"binomial counts exceed m={spec.family.size}")


@dataclass(frozen=True)
class PredictorState:
    eta: np.ndarray
    mu: np.ndarray
    r: int


def _mean_range_ok(family: Family, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    ok = np.isfinite(mu) & (mu > 0)
    if family.tag == BINOMIAL:
        ok &= mu < family.size
    return ok


def link(family: Family, mu):
    """Link function: log for Poisson/NB, log(mu / (m - mu)) for binomial."""
    mu_arr = np.asarray(mu, dtype=float)
    if not np.all(_mean_range_ok(family, mu_arr)):
        raise DomainError(f"mean outside the valid range of the {family} family")
    if family.tag == BINOMIAL:
        out = np.log(mu_arr) - np.log(family.size - mu_arr)
    else:
        out = np.log(mu_arr)
    return out[()] if out.ndim == 0 else out


def inverse_link(family: Family, eta):
    eta_arr = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta_arr)):
        raise DomainError("linear predictor must be finite")
    if family.tag == BINOMIAL:
        out = family.size * expit(eta_arr)
    else:
        out = np.exp(eta_arr)
    return out[()] if out.ndim == 0 else out


def clamp_counts(y, c: float) -> np.ndarray:
    """y* = max(y, c), the zero-safe argument of log in the recursion."""
    if not 0.0 < c < 1.0:
        raise DomainError(f"clamp c must lie in (0, 1), got {c}")
    return np.maximum(np.asarray(y, dtype=float), c)


def _log_const(family: Family, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if family.tag == POISSON:
        return -gammaln(y + 1.0)
    if family.tag == BINOMIAL:
        m = family.size
        return gammaln(m + 1.0) - gammaln(y + 1.0) - gammaln(m - y + 1.0)
    k = family.dispersion
    return gammaln(k + y) - gammaln(y + 1.0) - gammaln(k)


def log_density(family: Family, y, mu):
    """Conditional log pmf log f(y | mu) for the family; vectorised over y and mu."""
    y_arr = np.asarray(y)
    if np.any(y_arr < 0) or np.any(y_arr != np.round(y_arr)):
        raise DomainError("counts must be non-negative integers")
    if family.tag == BINOMIAL and np.any(y_arr > family.size):
        raise DomainError(f"binomial count exceeds m={family.size}")
    mu_arr = np.asarray(mu, dtype=float)
    if not np.all(_mean_range_ok(family, mu_arr)):
        raise DomainError(f"mean outside the valid range of the {family} family")
    y_arr = y_arr.astype(float)
    const = _log_const(family, y_arr)
    if family.tag == POISSON:
        out = y_arr * np.log(mu_arr) - mu_arr + const
    elif family.tag == BINOMIAL:
        m = family.size
        out = (y_arr * np.log(mu_arr / (m - mu_arr))
               + m * np.log((m - mu_arr) / m) + const)
    else:
        k = family.dispersion
        out = (k * np.log(k / (mu_arr + k))
               + y_arr * np.log(mu_arr / (mu_arr + k)) + const)
    return out[()] if np.ndim(out) == 0 else out


class _Prepared:
    """Arrays the kernels need, computed once per (spec, series)."""

    __slots__ = ("fam", "extra", "p", "q", "demean", "y", "logys", "const", "x", "clamp")

    def __init__(self, spec: ModelSpec, series: CountSeries):
        series.check(spec)
        self.fam = spec.family.code
        self.extra = spec.family.extra
        self.p = spec.p
        self.q = spec.q
        self.demean = spec.predictor_form == MEAN_SUBTRACTED
        self.clamp = spec.clamp
        self.y = series.y.astype(float)
        self.logys = np.log(clamp_counts(series.y, spec.clamp))
        self.const = _log_const(spec.family, self.y)
        self.x = series.x

    def loglik(self, params: np.ndarray) -> np.ndarray:
        params = np.ascontiguousarray(np.atleast_2d(params), dtype=float)
        return _kernels.loglik_batch(self.fam, self.extra, self.p, self.q, self.demean,
                                     self.y, self.logys, self.const, self.x, params)

    def logdens(self, params: np.ndarray, start: int) -> np.ndarray:
        params = np.ascontiguousarray(np.atleast_2d(params), dtype=float)
        return _kernels.logdens_batch(self.fam, self.extra, self.p, self.q, self.demean,
                                      self.y, self.logys, self.const, self.x, params,
                                      int(start))


def prepare(spec: ModelSpec, series: CountSeries) -> _Prepared:
    return _Prepared(spec, series)


def linear_predictor_pass(spec: ModelSpec, params: ParamVector,
                          series: CountSeries) -> PredictorState:
    """Run the recursion over the whole series and return eta and mu."""
    params.check(spec)
    series.check(spec)
    n = series.n
    xb = series.x @ params.beta if spec.n_beta else np.zeros(n)
    logys = np.log(clamp_counts(series.y, spec.clamp))
    eta, logmu, innov = np.empty(n), np.empty(n), np.empty(n)
    status = _kernels.predictor_pass(
        spec.family.code, spec.family.extra, spec.p, spec.q,
        spec.predictor_form == MEAN_SUBTRACTED, logys, np.ascontiguousarray(xb),
        params.phi, params.theta, eta, logmu, innov)
    if status >= 0:
        raise DivergenceError(series.origin + status)
    return PredictorState(eta=eta, mu=inverse_link(spec.family, eta) if n else eta.copy(),
                          r=spec.r)


def log_partial_likelihood(spec: ModelSpec, params: ParamVector, series: CountSeries) -> float:
    """Sum of conditional log densities for t = r+1, ..., n.

    The terms are ``log_density(y_t, mu_t)`` added with ``math.fsum``.  When
    a binomial mean saturates at 0 or m in floating point, the value comes
    from the eta-space kernel instead, which stays finite there.
    """
    state = linear_predictor_pass(spec, params, series)
    r = spec.r
    if series.n <= r:
        return 0.0
    try:
        terms = log_density(spec.family, series.y[r:], state.mu[r:])
        total = math.fsum(np.atleast_1d(terms))
    except DomainError:
        total = float(prepare(spec, series).loglik(params.flat())[0])
    if not np.isfinite(total):
        raise DivergenceError(series.origin + r, "log-likelihood is not finite")
    return total
