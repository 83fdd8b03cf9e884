"""Run configuration: a versioned YAML document with one section per module.

Example (every key optional; omitted keys take the defaults below)::

    schema_version: 1
    model:
      family: negbin          # poisson | binomial | negbin
      dispersion: 15          # negbin k (required for negbin)
      size: null              # binomial m (required for binomial)
      p: 1
      q: 1
      clamp: 0.1
      predictor_form: paper-literal   # or mean-subtracted
      covariates: [intercept]  # intercept, log_trend, cos:12, sin:12, external:<column>
    prior:  {mean_beta: 0.0, var_beta: 200.0, mean_phi: 0.0, var_phi: 200.0,
             mean_theta: 0.0, var_theta: 200.0}
    mcmc:   {iterations: 15000, burn_in: 1000, thin: 3, seed: 0, proposal_scale: 1.0}
    data:   {path: series.csv, y_column: y, scale_divisor: 1.0}
    forecast: {horizon: 1, delta: 0.05, interval_mode: percentile, density_csv: false}
    select: {orders: [[1, 0], [2, 0], [1, 1], [1, 2], [2, 1], [2, 2]], common_window: true}
    simulate: {n: 200, burn_in_sim: 200, seed: 0, beta: [0.8], phi: [0.5], theta: [0.3]}
    residuals: {seed: 0, max_lag: null}
    study: {kind: estimation, n: 1000, replications: 100, orders: [[1, 1]],
            candidate_orders: [[1, 1], [1, 2], [2, 1], [2, 2]], master_seed: 2024,
            burn_in_sim: 200, common_window: true, workers: 1, proposal_scale: 2.0}

Study scenarios for a negbin intercept-only model use the built-in generating
values for orders (1,1), (1,2), (2,1) and (2,2); any other model takes them
from the ``simulate`` section.

Unknown sections or keys are rejected.  Prior means may be scalars or lists.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .core import Covariate, Family, ModelSpec, ParamVector
from .errors import ConfigError, GarmaError
from .forecast import ForecastRequest
from .inference import McmcConfig, PriorSpec
from .study import STUDY_PROPOSAL_SCALE, StudyConfig, REFERENCE_SCENARIOS

SCHEMA_VERSION = 1


@dataclass
class ModelSection:
    family: str = "negbin"
    size: Optional[int] = None
    dispersion: Optional[float] = 15.0
    p: int = 1
    q: int = 1
    clamp: float = 0.1
    predictor_form: str = "paper-literal"
    covariates: list = field(default_factory=lambda: ["intercept"])


@dataclass
class PriorSection:
    mean_beta: object = 0.0
    var_beta: float = 200.0
    mean_phi: object = 0.0
    var_phi: float = 200.0
    mean_theta: object = 0.0
    var_theta: float = 200.0


@dataclass
class McmcSection:
    iterations: int = 15000
    burn_in: int = 1000
    thin: int = 3
    seed: int = 0
    proposal_scale: float = 1.0


@dataclass
class DataSection:
    path: Optional[str] = None
    y_column: str = "y"
    scale_divisor: float = 1.0


@dataclass
class ForecastSection:
    horizon: int = 1
    delta: float = 0.05
    interval_mode: str = "percentile"
    density_csv: bool = False


@dataclass
class SelectSection:
    orders: list = field(default_factory=lambda: [[1, 0], [2, 0], [1, 1], [1, 2], [2, 1], [2, 2]])
    common_window: bool = True


@dataclass
class SimulateSection:
    n: int = 200
    burn_in_sim: int = 200
    seed: int = 0
    beta: list = field(default_factory=lambda: [0.8])
    phi: list = field(default_factory=lambda: [0.5])
    theta: list = field(default_factory=lambda: [0.3])


@dataclass
class ResidualsSection:
    seed: int = 0
    max_lag: Optional[int] = None


@dataclass
class StudySection:
    kind: str = "estimation"
    n: int = 1000
    replications: int = 100
    orders: list = field(default_factory=lambda: [[1, 1]])
    candidate_orders: list = field(default_factory=lambda: [[1, 1], [1, 2], [2, 1], [2, 2]])
    master_seed: int = 2024
    burn_in_sim: int = 200
    common_window: bool = True
    workers: int = 1
    proposal_scale: float = STUDY_PROPOSAL_SCALE


_SECTIONS = {
    "model": ModelSection, "prior": PriorSection, "mcmc": McmcSection, "data": DataSection,
    "forecast": ForecastSection, "select": SelectSection, "simulate": SimulateSection,
    "residuals": ResidualsSection, "study": StudySection,
}


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    model: ModelSection = field(default_factory=ModelSection)
    prior: PriorSection = field(default_factory=PriorSection)
    mcmc: McmcSection = field(default_factory=McmcSection)
    data: DataSection = field(default_factory=DataSection)
    forecast: ForecastSection = field(default_factory=ForecastSection)
    select: SelectSection = field(default_factory=SelectSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    residuals: ResidualsSection = field(default_factory=ResidualsSection)
    study: StudySection = field(default_factory=StudySection)

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "RunConfig":
        doc = dict(doc or {})
        version = doc.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}")
        unknown = set(doc) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            body = doc.get(name) or {}
            if not isinstance(body, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            known = {f.name for f in dataclasses.fields(section_cls)}
            bad = set(body) - known
            if bad:
                raise ConfigError(f"unknown key(s) in {name}: {', '.join(sorted(bad))}")
            kwargs[name] = section_cls(**body)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        """Build every section's domain object once so bad values fail early."""
        try:
            self.model_spec()
            self.prior_spec()
            self.mcmc_config()
            self.forecast_request()
            if self.data.scale_divisor <= 0:
                raise ConfigError("data.scale_divisor must be positive")
            for o in self.select.orders + self.study.orders + self.study.candidate_orders:
                if len(o) != 2 or min(o) < 0:
                    raise ConfigError(f"orders must be [p, q] pairs, got {o!r}")
            if self.study.kind not in ("estimation", "selection"):
                raise ConfigError("study.kind must be 'estimation' or 'selection'")
            if self.study.workers < 1:
                raise ConfigError("study.workers must be >= 1")
        except ConfigError:
            raise
        except (GarmaError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def covariates(self) -> tuple:
        return tuple(parse_covariate(c) for c in self.model.covariates)

    def model_spec(self, p: Optional[int] = None, q: Optional[int] = None) -> ModelSpec:
        m = self.model
        if m.family == "poisson":
            fam = Family.poisson()
        elif m.family == "binomial":
            if m.size is None:
                raise ConfigError("model.size is required for the binomial family")
            fam = Family.binomial(m.size)
        elif m.family == "negbin":
            if m.dispersion is None:
                raise ConfigError("model.dispersion is required for the negbin family")
            fam = Family.negative_binomial(m.dispersion)
        else:
            raise ConfigError(f"unknown family {m.family!r}")
        return ModelSpec(fam, m.p if p is None else p, m.q if q is None else q,
                         self.covariates(), m.clamp, m.predictor_form)

    def prior_spec(self) -> PriorSpec:
        return PriorSpec(**dataclasses.asdict(self.prior))

    def mcmc_config(self, seed: Optional[int] = None) -> McmcConfig:
        kw = dataclasses.asdict(self.mcmc)
        if seed is not None:
            kw["seed"] = seed
        return McmcConfig(**kw)

    def forecast_request(self) -> ForecastRequest:
        f = self.forecast
        return ForecastRequest(horizon=f.horizon, delta=f.delta, interval_mode=f.interval_mode)

    def sim_params(self) -> ParamVector:
        s = self.simulate
        return ParamVector(s.beta, s.phi, s.theta)

    def study_config(self, seed: Optional[int] = None) -> StudyConfig:
        s = self.study
        base = self.model_spec()
        scenarios = []
        for p, q in s.orders:
            spec = base.with_order(p, q)
            if (p, q) in REFERENCE_SCENARIOS and self.model.family == "negbin" and spec.n_beta == 1:
                b0, phi, theta = REFERENCE_SCENARIOS[(p, q)]
                scenarios.append((spec, ParamVector([b0], phi, theta)))
            else:
                # other families/designs take their generating values from `simulate`
                params = self.sim_params()
                try:
                    params.check(spec)
                except GarmaError as exc:
                    raise ConfigError(
                        f"simulate.beta/phi/theta do not fit order ({p}, {q}): {exc}") from exc
                scenarios.append((spec, params))
        m = self.mcmc
        mcmc = McmcConfig(m.iterations, m.burn_in, m.thin, m.seed, s.proposal_scale)
        return StudyConfig(scenarios=tuple(scenarios), n=s.n, replications=s.replications,
                           mcmc=mcmc, prior=self.prior_spec(),
                           candidate_orders=tuple(tuple(o) for o in s.candidate_orders),
                           master_seed=s.master_seed if seed is None else seed,
                           burn_in_sim=s.burn_in_sim, common_window=s.common_window,
                           workers=s.workers)


def parse_covariate(text) -> Covariate:
    """``intercept``, ``log_trend``, ``cos:12``, ``sin:12`` or ``external:<column>``."""
    if not isinstance(text, str):
        raise ConfigError(f"covariate must be a string, got {text!r}")
    kind, _, arg = text.partition(":")
    try:
        if kind in ("cos", "sin"):
            return Covariate(kind, period=int(arg))
        if kind == "external":
            return Covariate(kind, column=arg)
        if arg:
            raise ConfigError(f"covariate {kind!r} takes no argument")
        return Covariate(kind)
    except ValueError as exc:
        raise ConfigError(f"bad covariate {text!r}: {exc}") from exc


def loads(text: str) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    return RunConfig.from_dict(doc)


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
