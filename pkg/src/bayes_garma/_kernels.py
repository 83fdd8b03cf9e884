"""Compiled inner loops for the GARMA recursion.

Everything here works on the link scale (eta) and on flat float arrays so
that numba can compile it; the public, validated API lives in ``core``.

Family codes: 0 = Poisson, 1 = Binomial, 2 = negative binomial.  ``extra``
is the binomial size m or the negative-binomial dispersion k (ignored for
Poisson).  ``demean`` selects the mean-subtracted AR term.
"""

import math

import numpy as np
from numba import njit

POISSON = 0
BINOMIAL = 1
NEGBIN = 2


@njit(cache=True)
def softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True)
def log_mean(fam, extra, eta):
    """log(inverse_link(eta)) without forming the mean first."""
    if fam == BINOMIAL:
        return math.log(extra) - softplus(-eta)
    return eta


@njit(cache=True)
def logpmf_eta(fam, extra, y, eta, const):
    # const carries the y-only normalising terms (log-gamma pieces).
    if fam == POISSON:
        return y * eta - math.exp(eta) + const
    if fam == BINOMIAL:
        return y * eta - extra * softplus(eta) + const
    lk = math.log(extra)
    if eta > lk:
        big = eta + math.log1p(math.exp(lk - eta))
    else:
        big = lk + math.log1p(math.exp(eta - lk))
    return extra * (lk - big) + y * (eta - big) + const


@njit(cache=True)
def predictor_pass(fam, extra, p, q, demean, logys, xb, phi, theta,
                   eta, logmu, innov):
    """Fill eta/logmu/innov in place; return -1 or the 0-based divergent t."""
    n = logys.shape[0]
    r = max(p, q)
    for t in range(min(r, n)):
        eta[t] = xb[t]
        logmu[t] = log_mean(fam, extra, xb[t])
        innov[t] = 0.0
    for t in range(r, n):
        e = xb[t]
        for j in range(1, p + 1):
            a = logys[t - j]
            if demean:
                a -= xb[t - j]
            e += phi[j - 1] * a
        for j in range(1, q + 1):
            e += theta[j - 1] * innov[t - j]
        if not np.isfinite(e):
            return t
        eta[t] = e
        lm = log_mean(fam, extra, e)
        logmu[t] = lm
        innov[t] = logys[t] - lm
    return -1


@njit(cache=True)
def _xbeta(x, params, nb):
    n = x.shape[0]
    out = np.zeros(n)
    for t in range(n):
        s = 0.0
        for i in range(nb):
            s += x[t, i] * params[i]
        out[t] = s
    return out


@njit(cache=True)
def loglik_batch(fam, extra, p, q, demean, y, logys, const, x, params):
    """Partial log-likelihood for every row of ``params``; -inf on divergence."""
    ndraw = params.shape[0]
    n = y.shape[0]
    nb = x.shape[1]
    r = max(p, q)
    out = np.empty(ndraw)
    eta = np.empty(n)
    logmu = np.empty(n)
    innov = np.empty(n)
    for k in range(ndraw):
        row = params[k]
        xb = _xbeta(x, row, nb)
        phi = row[nb:nb + p]
        theta = row[nb + p:nb + p + q]
        status = predictor_pass(fam, extra, p, q, demean, logys, xb, phi,
                                theta, eta, logmu, innov)
        if status >= 0:
            out[k] = -np.inf
            continue
        s = 0.0
        for t in range(r, n):
            s += logpmf_eta(fam, extra, y[t], eta[t], const[t])
        if np.isnan(s):
            s = -np.inf
        out[k] = s
    return out


@njit(cache=True)
def logdens_batch(fam, extra, p, q, demean, y, logys, const, x, params, start):
    """Per-observation log densities, shape (draws, n - start).

    Rows of diverging draws are filled with -inf.
    """
    ndraw = params.shape[0]
    n = y.shape[0]
    nb = x.shape[1]
    out = np.empty((ndraw, n - start))
    eta = np.empty(n)
    logmu = np.empty(n)
    innov = np.empty(n)
    for k in range(ndraw):
        row = params[k]
        xb = _xbeta(x, row, nb)
        phi = row[nb:nb + p]
        theta = row[nb + p:nb + p + q]
        status = predictor_pass(fam, extra, p, q, demean, logys, xb, phi,
                                theta, eta, logmu, innov)
        for t in range(start, n):
            if status >= 0:
                out[k, t - start] = -np.inf
            else:
                v = logpmf_eta(fam, extra, y[t], eta[t], const[t])
                out[k, t - start] = v if not np.isnan(v) else -np.inf
    return out


@njit(cache=True)
def forecast_batch(fam, extra, p, q, demean, clamp, logys, x_all, params, horizon):
    """Per-draw conditional means for the next ``horizon`` steps.

    ``x_all`` holds the observed rows followed by ``horizon`` future rows.
    Future lags use the draw's own conditional mean in place of y.  Rows of
    diverging draws are NaN.
    """
    ndraw = params.shape[0]
    n = logys.shape[0]
    total = n + horizon
    nb = x_all.shape[1]
    out = np.empty((ndraw, horizon))
    eta = np.empty(n)
    logmu = np.empty(n)
    ly = np.empty(total)
    inn = np.empty(total)
    for k in range(ndraw):
        row = params[k]
        xb = _xbeta(x_all, row, nb)
        phi = row[nb:nb + p]
        theta = row[nb + p:nb + p + q]
        status = predictor_pass(fam, extra, p, q, demean, logys, xb[:n], phi,
                                theta, eta, logmu, inn[:n])
        if status >= 0:
            out[k, :] = np.nan
            continue
        ly[:n] = logys
        ok = True
        for h in range(horizon):
            t = n + h
            e = xb[t]
            for j in range(1, p + 1):
                a = ly[t - j]
                if demean:
                    a -= xb[t - j]
                e += phi[j - 1] * a
            for j in range(1, q + 1):
                e += theta[j - 1] * inn[t - j]
            if not np.isfinite(e):
                ok = False
                break
            lm = log_mean(fam, extra, e)
            m = math.exp(lm)
            if not np.isfinite(m):
                ok = False
                break
            out[k, h] = m
            ly[t] = math.log(max(m, clamp))
            inn[t] = ly[t] - lm
        if not ok:
            out[k, :] = np.nan
    return out
