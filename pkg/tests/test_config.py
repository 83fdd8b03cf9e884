import pytest

from bayes_garma import Family
from bayes_garma.config import RunConfig, dumps, load, loads, parse_covariate
from bayes_garma.errors import ConfigError


class TestRoundTrip:
    def test_defaults(self):
        cfg = RunConfig()
        assert loads(dumps(cfg)) == cfg

    def test_modified(self):
        cfg = loads("model: {family: poisson, p: 2, q: 0}\nmcmc: {iterations: 300, thin: 2}\n")
        assert loads(dumps(cfg)) == cfg
        assert cfg.model_spec().family == Family.poisson()
        assert cfg.mcmc_config().iterations == 300

    def test_empty_document(self):
        assert loads("") == RunConfig()


class TestRejects:
    @pytest.mark.parametrize("text", [
        "bogus: {}",
        "model: {famly: poisson}",
        "schema_version: 2",
        "model: {family: gamma}",
        "model: {family: binomial}",
        "mcmc: {thin: 0}",
        "forecast: {delta: 0.7}",
        "study: {kind: other}",
        "- just\n- a list",
        "model: [1, 2]",
        "model: {family: poisson",
    ])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            loads(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load(tmp_path / "nope.yaml")


class TestCovariates:
    def test_kinds(self):
        assert parse_covariate("cos:12").period == 12
        assert parse_covariate("external:temp").column == "temp"
        assert parse_covariate("intercept").kind == "intercept"

    @pytest.mark.parametrize("text", ["cos:x", "intercept:3", 7])
    def test_bad(self, text):
        with pytest.raises(ConfigError):
            parse_covariate(text)


class TestStudyConfig:
    def test_builtin_scenarios(self):
        cfg = loads("study: {orders: [[1, 2]], replications: 5}")
        sc = cfg.study_config()
        assert sc.scenarios[0][1].flat().tolist() == [1.0, 0.3, 0.4, 0.25]
        assert sc.mcmc.proposal_scale == 2.0

    def test_fallback_to_simulate(self):
        cfg = loads("model: {family: poisson}\nstudy: {orders: [[1, 1]]}")
        assert cfg.study_config().scenarios[0][1].flat().tolist() == [0.8, 0.5, 0.3]

    def test_fallback_length_mismatch(self):
        cfg = loads("model: {family: poisson}\nstudy: {orders: [[2, 1]]}")
        with pytest.raises(ConfigError):
            cfg.study_config()
