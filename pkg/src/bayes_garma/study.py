"""Monte-Carlo harness: estimation accuracy and order-selection rates.

Replication seeds come from ``SeedSequence([master_seed, scenario, rep])`` so
results do not depend on how replications are scheduled across workers.
"""

from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import ModelSpec, ParamVector, Family, CountSeries
from .criteria import CRITERIA, criteria_report, select
from .errors import DomainError, GarmaError, StudyError
from .inference import McmcConfig, PosteriorSample, PriorSpec, acceptance_rate, mh_sample
from .simulate import SimConfig, simulate_series

logger = logging.getLogger(__name__)

# Generating values for the negative-binomial scenarios, keyed by (p, q):
# (beta0, phi, theta).
REFERENCE_SCENARIOS = {
    (1, 1): (0.80, (0.50,), (0.30,)),
    (1, 2): (1.00, (0.30,), (0.40, 0.25)),
    (2, 1): (0.55, (0.30, 0.40), (0.20,)),
    (2, 2): (0.65, (0.30, 0.40), (0.25, 0.35)),
}

# Proposal inflation used by the study defaults; see README ("Acceptance rates").
STUDY_PROPOSAL_SCALE = 2.0

MAX_FAILURE_FRACTION = 0.05


def reference_scenario(order: Tuple[int, int], k: float = 15.0) -> Tuple[ModelSpec, ParamVector]:
    b0, phi, theta = REFERENCE_SCENARIOS[tuple(order)]
    spec = ModelSpec(Family.negative_binomial(k), order[0], order[1])
    return spec, ParamVector([b0], phi, theta)


def default_mcmc(seed: int = 0) -> McmcConfig:
    return McmcConfig(iterations=15000, burn_in=1000, thin=3, seed=seed,
                      proposal_scale=STUDY_PROPOSAL_SCALE)


@dataclass(frozen=True)
class StudyConfig:
    scenarios: tuple = field(default_factory=lambda: (reference_scenario((1, 1)),))
    n: int = 1000
    replications: int = 100
    mcmc: McmcConfig = field(default_factory=default_mcmc)
    prior: PriorSpec = field(default_factory=PriorSpec)
    candidate_orders: tuple = ((1, 1), (1, 2), (2, 1), (2, 2))
    master_seed: int = 2024
    burn_in_sim: int = 200
    common_window: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "candidate_orders",
                           tuple(tuple(int(v) for v in o) for o in self.candidate_orders))
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if len(set(self.candidate_orders)) != len(self.candidate_orders):
            raise DomainError("candidate orders must be distinct")
        for spec, params in self.scenarios:
            params.check(spec)


@dataclass
class ParameterSummary:
    name: str
    truth: float
    mean: float
    var_of_means: float
    mean_posterior_var: float
    cb: Optional[float]
    ce: Optional[float]
    ap: float


@dataclass
class ScenarioResult:
    order: Tuple[int, int]
    truth: np.ndarray
    names: List[str]
    estimates: np.ndarray
    posterior_vars: np.ndarray
    accept_rates: np.ndarray
    failures: int
    parameters: List[ParameterSummary] = field(default_factory=list)
    selection: Dict[str, float] = field(default_factory=dict)
    choices: List[Dict[str, Tuple[int, int]]] = field(default_factory=list)


@dataclass
class StudyReport:
    kind: str
    n: int
    replications: int
    scenarios: List[ScenarioResult]
    wall_time: float

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n": self.n, "replications": self.replications,
               "wall_time": self.wall_time, "scenarios": []}
        for sc in self.scenarios:
            entry = {"order": list(sc.order), "failures": sc.failures,
                     "completed": int(sc.estimates.shape[0])}
            if self.kind == "estimation":
                entry["ap"] = float(np.mean(sc.accept_rates)) if sc.accept_rates.size else None
                entry["parameters"] = [vars(p) for p in sc.parameters]
            else:
                entry["selection"] = dict(sc.selection)
            out["scenarios"].append(entry)
        return out


def corrected_bias(truth: float, estimates) -> float:
    """Mean absolute relative deviation of the estimates from a non-zero truth."""
    est = np.asarray(estimates, dtype=float).ravel()
    if truth == 0:
        raise DomainError("corrected bias is undefined for a zero true value")
    if est.size < 1:
        raise DomainError("need at least one estimate")
    return float(np.mean(np.abs((truth - est) / truth)))


def corrected_error(truth: float, estimates) -> float:
    """sqrt(MSE / sample variance of the estimates), variance with m - 1."""
    est = np.asarray(estimates, dtype=float).ravel()
    if est.size < 2:
        raise DomainError("corrected error needs at least two estimates")
    var = float(np.var(est, ddof=1))
    if not var > 0:
        raise DomainError("corrected error is undefined when all estimates are equal")
    mse = float(np.mean((est - truth) ** 2))
    return float(np.sqrt(mse / var))


def replication_seeds(master_seed: int, scenario: int, rep: int) -> Tuple[int, int]:
    """(simulation seed, sampler seed) for one replication."""
    state = np.random.SeedSequence([int(master_seed), int(scenario), int(rep)]).generate_state(2)
    return int(state[0]), int(state[1])


def _with_seed(mcmc: McmcConfig, seed: int) -> McmcConfig:
    return McmcConfig(mcmc.iterations, mcmc.burn_in, mcmc.thin, seed, mcmc.proposal_scale)


def _estimation_rep(args):
    cfg, s_idx, rep = args
    spec, truth = cfg.scenarios[s_idx]
    sim_seed, mc_seed = replication_seeds(cfg.master_seed, s_idx, rep)
    try:
        series = simulate_series(SimConfig(spec, truth, cfg.n, cfg.burn_in_sim, sim_seed))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sample = mh_sample(spec, cfg.prior, series, _with_seed(cfg.mcmc, mc_seed))
    except GarmaError as exc:
        logger.info("scenario %d replication %d failed: %s", s_idx, rep, exc)
        return None
    return (sample.draws.mean(axis=0), sample.draws.var(axis=0, ddof=1),
            acceptance_rate(sample))


def fit_candidates(spec: ModelSpec, prior: PriorSpec, series: CountSeries,
                   orders: Sequence[Tuple[int, int]], mcmc: McmcConfig,
                   common_window: bool = True):
    """Fit every (p, q) and compute criteria; returns ({order: report}, {order: sample}).

    Models are fitted in order of increasing size and each one starts its
    optimizer from the best nested, already-fitted model padded with zeros.
    With ``common_window`` all criteria use the likelihood window of the
    largest r among the candidates, so deviances cover the same observations.
    """
    start = max(max(p, q) for p, q in orders) if common_window else None
    fitted: Dict[Tuple[int, int], PosteriorSample] = {}
    reports = {}
    for order in sorted(orders, key=lambda o: (o[0] + o[1], o)):
        sp = spec.with_order(*order)
        init = _nested_init(sp, fitted, spec)
        sample = mh_sample(sp, prior, series, mcmc, init=init)
        fitted[order] = sample
        reports[order] = criteria_report(sp, series, sample, start=start)
    return reports, fitted


def _nested_init(spec: ModelSpec, fitted, base: ModelSpec) -> Optional[ParamVector]:
    best = None
    for (p, q), sample in fitted.items():
        if p <= spec.p and q <= spec.q:
            if best is None or p + q > best[0][0] + best[0][1]:
                best = ((p, q), sample)
    if best is None:
        return None
    (p, q), sample = best
    sub = base.with_order(p, q)
    prm = ParamVector.from_flat(sub, sample.map_estimate)
    phi = np.zeros(spec.p)
    theta = np.zeros(spec.q)
    phi[:p] = prm.phi
    theta[:q] = prm.theta
    return ParamVector(prm.beta, phi, theta)


def _selection_rep(args):
    cfg, s_idx, rep = args
    spec, truth = cfg.scenarios[s_idx]
    sim_seed, mc_seed = replication_seeds(cfg.master_seed, s_idx, rep)
    try:
        series = simulate_series(SimConfig(spec, truth, cfg.n, cfg.burn_in_sim, sim_seed))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            reports, _ = fit_candidates(spec, cfg.prior, series, cfg.candidate_orders,
                                        _with_seed(cfg.mcmc, mc_seed), cfg.common_window)
    except GarmaError as exc:
        logger.info("scenario %d replication %d failed: %s", s_idx, rep, exc)
        return None
    return select(reports)


def _run(fn, cfg: StudyConfig, s_idx: int):
    jobs = [(cfg, s_idx, rep) for rep in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _check_failures(failures: int, cfg: StudyConfig, order):
    if failures > MAX_FAILURE_FRACTION * cfg.replications:
        raise StudyError(f"{failures} of {cfg.replications} replications failed for order {order}")


def run_estimation_study(cfg: StudyConfig) -> StudyReport:
    t0 = time.perf_counter()
    results = []
    for s_idx, (spec, truth) in enumerate(cfg.scenarios):
        out = _run(_estimation_rep, cfg, s_idx)
        ok = [o for o in out if o is not None]
        failures = len(out) - len(ok)
        _check_failures(failures, cfg, (spec.p, spec.q))
        est = np.array([o[0] for o in ok]).reshape(len(ok), spec.dim)
        pvar = np.array([o[1] for o in ok]).reshape(len(ok), spec.dim)
        rates = np.array([o[2] for o in ok])
        tv = truth.flat()
        sc = ScenarioResult((spec.p, spec.q), tv, spec.param_names(), est, pvar, rates, failures)
        for j, name in enumerate(sc.names):
            col = est[:, j]
            try:
                ce = corrected_error(tv[j], col)
            except DomainError:
                ce = None
            sc.parameters.append(ParameterSummary(
                name=name, truth=float(tv[j]), mean=float(col.mean()),
                var_of_means=float(col.var(ddof=1)) if col.size > 1 else float("nan"),
                mean_posterior_var=float(pvar[:, j].mean()),
                cb=corrected_bias(tv[j], col) if tv[j] != 0 else None,
                ce=ce, ap=float(rates.mean())))
        results.append(sc)
    return StudyReport("estimation", cfg.n, cfg.replications, results, time.perf_counter() - t0)


def run_selection_study(cfg: StudyConfig) -> StudyReport:
    t0 = time.perf_counter()
    results = []
    for s_idx, (spec, truth) in enumerate(cfg.scenarios):
        order = (spec.p, spec.q)
        if order not in cfg.candidate_orders:
            raise DomainError(f"true order {order} is not among the candidates")
        out = _run(_selection_rep, cfg, s_idx)
        ok = [o for o in out if o is not None]
        failures = len(out) - len(ok)
        _check_failures(failures, cfg, order)
        sc = ScenarioResult(order, truth.flat(), spec.param_names(), np.zeros((len(ok), 0)),
                            np.zeros((len(ok), 0)), np.zeros(0), failures, choices=ok)
        for crit in CRITERIA:
            hits = sum(1 for ch in ok if tuple(ch[crit]) == order)
            sc.selection[crit] = hits / len(ok) if ok else float("nan")
        results.append(sc)
    return StudyReport("selection", cfg.n, cfg.replications, results, time.perf_counter() - t0)
