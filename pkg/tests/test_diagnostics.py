import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bayes_garma import CountSeries, Family, ModelSpec, ParamVector
from bayes_garma.core import log_density
from bayes_garma.diagnostics import (
    acf,
    family_cdf,
    geweke,
    geweke_z,
    kolmogorov_sf,
    ks_normality,
    mape,
    quantile_residuals,
    spectral_density_zero,
)
from bayes_garma.errors import DegenerateChainError, DomainError
from bayes_garma.simulate import SimConfig, simulate_series

from conftest import point_sample


class TestGeweke:
    def test_constant_chain(self):
        with pytest.raises(DegenerateChainError):
            geweke_z(np.ones(1000))

    def test_too_short(self):
        with pytest.raises(DomainError):
            geweke_z(np.arange(50.0))

    def test_bad_fractions(self):
        with pytest.raises(DomainError):
            geweke_z(np.random.default_rng(0).normal(size=500), 0.6, 0.5)

    def test_iid_normal(self):
        passes = sum(abs(geweke_z(np.random.default_rng(s).standard_normal(10_000))) < 3
                     for s in range(100))
        assert passes >= 99

    def test_ramp(self):
        rng = np.random.default_rng(0)
        chain = np.linspace(0.0, 1.0, 5000) + 1e-3 * rng.standard_normal(5000)
        assert abs(geweke_z(chain)) > 4

    def test_segments_by_hand(self):
        """iid chain with white-noise segments: compare with a direct computation."""
        rng = np.random.default_rng(4)
        x = rng.standard_normal(1000)
        a, b = x[:100], x[500:]
        z = (a.mean() - b.mean()) / math.sqrt(spectral_density_zero(a) / 100
                                              + spectral_density_zero(b) / 500)
        assert geweke_z(x) == z

    def test_spectral_density_white_noise(self):
        x = np.random.default_rng(5).standard_normal(200_000)
        assert spectral_density_zero(x) == pytest.approx(1.0, abs=0.15)

    def test_spectral_density_ar1(self):
        rng = np.random.default_rng(6)
        e = rng.standard_normal(200_000)
        x = np.empty_like(e)
        x[0] = e[0]
        for t in range(1, e.size):
            x[t] = 0.5 * x[t - 1] + e[t]
        # long-run variance of an AR(1) is sigma^2 / (1 - rho)^2 = 4
        assert spectral_density_zero(x) == pytest.approx(4.0, rel=0.05)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 100.0), st.floats(-1e3, 1e3), st.integers(0, 10_000))
    def test_affine_invariance(self, a, b, seed):
        x = np.random.default_rng(seed).standard_normal(400)
        z = geweke_z(x)
        assert geweke_z(a * x + b) == pytest.approx(z, abs=1e-10, rel=1e-9)
        # a negative scale swaps the sign of the mean difference
        assert geweke_z(-a * x + b) == pytest.approx(-z, abs=1e-10, rel=1e-9)

    def test_report(self):
        draws = np.random.default_rng(1).standard_normal((2000, 3))
        rep = geweke(draws)
        assert rep.z.shape == (3,)
        assert rep.frac_a == 0.10 and rep.frac_b == 0.50
        assert rep.converged.dtype == bool


class TestAcf:
    def test_lag_zero(self):
        assert acf(np.random.default_rng(0).normal(size=50), 5)[0] == 1.0

    def test_alternating(self):
        n = 100
        x = np.array([(-1.0) ** i for i in range(n)])
        assert acf(x, 1)[1] == pytest.approx(-(n - 1) / n, abs=1e-12)

    def test_white_noise(self):
        n = 400
        ok = sum(abs(acf(np.random.default_rng(s).standard_normal(n), 1)[1]) < 2 / math.sqrt(n)
                 for s in range(100))
        assert ok >= 90

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=60))
    def test_bounded(self, values):
        x = np.asarray(values)
        if np.ptp(x) < 1e-6:
            return
        assert np.all(np.abs(acf(x, len(values) - 1)) <= 1.0 + 1e-12)

    def test_constant(self):
        with pytest.raises(DomainError):
            acf(np.ones(10), 2)


class TestKs:
    def test_plotting_positions(self):
        n = 50
        x = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
        d, _ = ks_normality(x, 0.0, 1.0)
        assert d == pytest.approx(0.5 / n, abs=1e-12)

    def test_all_equal(self):
        d, _ = ks_normality(np.full(20, 0.3), 0.0, 1.0)
        assert d >= 0.5

    def test_null_pvalues(self):
        ok = sum(ks_normality(x := np.random.default_rng(s).standard_normal(2000), 0.0, 1.0)[1] > 0.01
                 for s in range(100))
        assert ok >= 98

    def test_matches_scipy(self):
        x = np.random.default_rng(3).normal(0.2, 1.3, size=300)
        d, p = ks_normality(x, 0.2, 1.3)
        ref = stats.kstest(x, "norm", args=(0.2, 1.3))
        assert d == pytest.approx(ref.statistic, abs=1e-12)
        assert p == pytest.approx(stats.kstwobign.sf(math.sqrt(300) * d), abs=1e-12)

    def test_kolmogorov_sf(self):
        for lam in (0.2, 0.5, 1.0, 1.36, 2.5):
            assert kolmogorov_sf(lam) == pytest.approx(stats.kstwobign.sf(lam), abs=1e-12)
        assert kolmogorov_sf(0.05) == 1.0

    def test_small_sample(self):
        with pytest.raises(DomainError):
            ks_normality(np.arange(5.0), 0.0, 1.0)


class TestResiduals:
    @pytest.mark.parametrize("family", [Family.poisson(), Family.binomial(12),
                                        Family.negative_binomial(4.0)], ids=str)
    def test_cdf_matches_pmf(self, family):
        spec = ModelSpec(family)
        mu = 3.7
        ys = np.arange(0, 13)
        cum = np.cumsum(np.exp(log_density(family, ys, mu)))
        assert np.allclose(family_cdf(spec, ys, mu), cum, rtol=1e-12, atol=1e-15)
        assert family_cdf(spec, -1, mu) == 0.0

    def test_length_and_acf(self, nb11_spec, nb11_series, nb11_truth):
        rep = quantile_residuals(nb11_spec, nb11_truth, nb11_series, seed=3)
        assert rep.residuals.size == nb11_series.n - nb11_spec.r
        assert rep.acf[0] == 1.0
        assert rep.acf.size == min(40, rep.residuals.size // 4) + 1

    def test_seeded(self, nb11_spec, nb11_series, nb11_truth):
        a = quantile_residuals(nb11_spec, nb11_truth, nb11_series, seed=3)
        b = quantile_residuals(nb11_spec, nb11_truth, nb11_series, seed=3)
        assert np.array_equal(a.residuals, b.residuals)

    def test_accepts_sample(self, nb11_spec, nb11_series, nb11_truth):
        a = quantile_residuals(nb11_spec, point_sample(nb11_truth.flat(), q=1), nb11_series, seed=1)
        b = quantile_residuals(nb11_spec, nb11_truth, nb11_series, seed=1)
        assert np.array_equal(a.residuals, b.residuals)

    def test_true_model_moments(self, nb11_spec, nb11_truth):
        ok = 0
        for rep in range(100):
            series = simulate_series(SimConfig(nb11_spec, nb11_truth, n=300, seed=1000 + rep))
            r = quantile_residuals(nb11_spec, nb11_truth, series, seed=rep)
            ok += (-0.2 < r.mean < 0.2) and (0.8 < r.sd < 1.3)
        assert ok >= 90

    def test_extreme_uniform_clamped(self):
        # a huge count under a tiny mean puts F(y - 1) at 1 in double precision
        spec = ModelSpec(Family.poisson())
        series = CountSeries.build([200] * 30)
        with pytest.warns(RuntimeWarning, match="clamped"):
            rep = quantile_residuals(spec, ParamVector([0.0]), series)
        assert np.all(rep.residuals == stats.norm.ppf(1 - 1e-12))

    def test_summary_keys(self, nb11_spec, nb11_series, nb11_truth):
        s = quantile_residuals(nb11_spec, nb11_truth, nb11_series).summary()
        assert set(s) == {"mean", "sd", "ks_statistic", "ks_pvalue", "acf"}


class TestMape:
    def test_exact(self):
        assert mape([3, 4], [3, 4]) == 0.0

    def test_hand(self):
        assert mape([100, 200], [110, 180]) == pytest.approx(10.0, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1, 1e3), min_size=1, max_size=20), st.floats(0.01, 100))
    def test_scale_invariant(self, a, c):
        a = np.asarray(a)
        p = a * 1.1 + 0.5
        assert mape(c * a, c * p) == pytest.approx(mape(a, p), rel=1e-12)

    def test_zero_actual(self):
        with pytest.raises(DomainError):
            mape([0, 1], [1, 1])
