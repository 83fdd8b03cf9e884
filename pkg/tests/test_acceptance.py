"""End-to-end acceptance criteria.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
figures.  These run the sampler many times and take several minutes in
total; select them with ``-m acceptance`` or skip them with
``-m "not acceptance"``.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate, stats

from bayes_garma import CountSeries, Family, ModelSpec, ParamVector
from bayes_garma.diagnostics import geweke_z, quantile_residuals
from bayes_garma.forecast import PERCENTILE, ForecastRequest, credible_interval, forecast
from bayes_garma.inference import McmcConfig, PriorSpec, mh_sample
from bayes_garma.simulate import SimConfig, simulate_series
from bayes_garma.study import (
    StudyConfig,
    default_mcmc,
    reference_scenario,
    run_estimation_study,
    run_selection_study,
)

from test_forecast import density, scan_oracle

pytestmark = pytest.mark.acceptance

WORKERS = max(1, os.cpu_count() or 1)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}")


def test_1_quadrature_oracle(capsys):
    spec = ModelSpec(Family.poisson())
    series = simulate_series(SimConfig(spec, ParamVector([1.2]), n=50, seed=101))
    t0 = time.perf_counter()
    sample = mh_sample(spec, PriorSpec(), series, McmcConfig(seed=7))
    elapsed = time.perf_counter() - t0

    y = series.y
    grid = np.linspace(-3.0, 5.0, 40_001)
    logpost = (stats.poisson.logpmf(y[None, :], np.exp(grid)[:, None]).sum(axis=1)
               + stats.norm.logpdf(grid, 0.0, math.sqrt(200.0)))
    w = np.exp(logpost - logpost.max())
    z = integrate.trapezoid(w, grid)
    mean = integrate.trapezoid(grid * w, grid) / z
    sd = math.sqrt(integrate.trapezoid((grid - mean) ** 2 * w, grid) / z)

    d_mean = abs(sample.draws[:, 0].mean() - mean)
    d_sd = abs(sample.draws[:, 0].std(ddof=1) - sd)
    ok = d_mean < 0.01 and d_sd < 0.01 and elapsed < 10
    report(capsys, 1, ok, f"|dmean|={d_mean:.4f} |dsd|={d_sd:.4f} time={elapsed:.2f}s")
    assert ok


def test_2_estimation_recovery(capsys):
    cfg = StudyConfig(scenarios=(reference_scenario((1, 1)),), n=1000, replications=100,
                      mcmc=default_mcmc(), master_seed=2024, workers=WORKERS)
    rep = run_estimation_study(cfg)
    sc = rep.scenarios[0]
    target = {"beta0": 0.8571, "phi1": 0.4695, "theta1": 0.2927}
    means = {p.name: p.mean for p in sc.parameters}
    ces = {p.name: p.ce for p in sc.parameters}
    cb_beta = sc.parameters[0].cb
    ap = float(np.mean(sc.accept_rates))
    ok = (all(abs(means[k] - v) <= 0.10 for k, v in target.items())
          and cb_beta <= 0.20
          and all(ce is not None and 0.7 <= ce <= 1.6 for ce in ces.values())
          and 0.15 <= ap <= 0.75)
    detail = (", ".join(f"{k}={means[k]:.4f}" for k in target)
              + f"; CB(beta0)={cb_beta:.4f}; CE="
              + ",".join(f"{ces[k]:.3f}" for k in target)
              + f"; AP={ap:.3f}; failures={sc.failures}; time={rep.wall_time:.0f}s")
    report(capsys, 2, ok, detail)
    assert ok


def test_3_order_selection(capsys):
    cfg = StudyConfig(scenarios=(reference_scenario((1, 1)),), n=1000, replications=50,
                      mcmc=default_mcmc(), master_seed=2024, workers=WORKERS)
    rep = run_selection_study(cfg)
    rates = rep.scenarios[0].selection
    thresholds = {"ebic": 0.90, "cpo": 0.70, "dic": 0.55}
    ok = all(rates[k] >= v for k, v in thresholds.items())
    detail = ", ".join(f"{k.upper()}={rates[k]:.2f} (need {v:.2f})"
                       for k, v in thresholds.items())
    report(capsys, 3, ok, detail + f"; time={rep.wall_time:.0f}s")
    assert ok


def test_4_density_normalisation(capsys, nb11_spec, nb11_series):
    sample = mh_sample(nb11_spec, PriorSpec(), nb11_series,
                       McmcConfig(iterations=3000, burn_in=300, thin=3, seed=4))
    fc = forecast(nb11_spec, sample, nb11_series, ForecastRequest(horizon=6))
    worst = max(abs(d.prob.sum() + d.tail_mass_bound - 1.0) for d in fc.densities)
    matches = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        prob = rng.dirichlet(np.full(rng.integers(3, 60), 0.5))
        delta = float(rng.uniform(0.005, 0.3))
        matches += credible_interval(density(prob), delta, PERCENTILE) == scan_oracle(prob, delta)
    ok = worst <= 1e-6 and matches == 20
    report(capsys, 4, ok, f"max|mass+tail-1|={worst:.2e}; scan matches {matches}/20")
    assert ok


def test_5_interval_coverage(capsys, nb11_spec, nb11_truth):
    mcmc = McmcConfig(iterations=3000, burn_in=300, thin=3)
    hits = 0
    reps = 200
    for rep in range(reps):
        full = simulate_series(SimConfig(nb11_spec, nb11_truth, n=301, seed=5000 + rep))
        train = CountSeries.build(full.y[:-1])
        sample = mh_sample(nb11_spec, PriorSpec(), train,
                           McmcConfig(mcmc.iterations, mcmc.burn_in, mcmc.thin, seed=rep))
        fc = forecast(nb11_spec, sample, train, ForecastRequest(horizon=1, delta=0.05))
        hits += fc.lower[0] <= full.y[-1] <= fc.upper[0]
    coverage = hits / reps
    ok = abs(coverage - 0.90) <= 0.06
    report(capsys, 5, ok, f"coverage={coverage:.3f} over {reps} replications")
    assert ok


def test_6_residual_calibration(capsys, nb11_spec, nb11_truth):
    passes = 0
    for rep in range(100):
        series = simulate_series(SimConfig(nb11_spec, nb11_truth, n=300, seed=7000 + rep))
        sample = mh_sample(nb11_spec, PriorSpec(), series,
                           McmcConfig(iterations=3000, burn_in=300, thin=3, seed=rep))
        passes += quantile_residuals(nb11_spec, sample, series, seed=rep).ks_pvalue > 0.01
    ok = passes >= 90
    report(capsys, 6, ok, f"{passes}/100 replications pass KS at 1%")
    assert ok


def test_7_geweke(capsys):
    calm = sum(abs(geweke_z(np.random.default_rng(s).standard_normal(5000))) <= 2
               for s in range(100))
    trend = 0
    for s in range(100):
        x = np.random.default_rng(100 + s).standard_normal(5000) + np.linspace(0.0, 1.0, 5000)
        trend += abs(geweke_z(x)) > 4
    ok = calm >= 90 and trend >= 95
    report(capsys, 7, ok, f"iid |z|<=2: {calm}/100; trend |z|>4: {trend}/100")
    assert ok


def test_8_unit_suite_time(capsys):
    here = os.path.dirname(os.path.abspath(__file__))
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-m", "not acceptance",
                           "-p", "no:cacheprovider", here],
                          capture_output=True, text=True, cwd=os.path.dirname(here))
    elapsed = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else ""
    ok = proc.returncode == 0 and elapsed < 120
    report(capsys, 8, ok, f"{tail} (wall {elapsed:.1f}s)")
    assert ok
