"""Command-line front end.

Usage::

    bayes-garma <command> [--config FILE] [--seed N] [--out DIR] [--data CSV]

Commands are ``simulate``, ``fit``, ``select``, ``forecast``, ``residuals``
and ``study``.  Each writes ``summary.json`` plus CSV tables into ``--out``.
Exit status is 0 on success, 2 for usage or configuration errors and 1 for
failures while running; failures also print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load
from .core import CountSeries, ModelSpec
from .criteria import criteria_report, select
from .diagnostics import geweke, quantile_residuals
from .errors import ConfigError, DegenerateChainError, DomainError, GarmaError
from .forecast import forecast
from .inference import PosteriorSample, acceptance_rate, mh_sample
from .io import Results, Table, draws_table, emit_report, load_series
from .simulate import SimConfig, simulate_series
from .study import fit_candidates, run_estimation_study, run_selection_study

COMMANDS = ("simulate", "fit", "select", "forecast", "residuals", "study")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so run_command can return 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bayes-garma", description="Bayesian GARMA models for count series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    helps = {
        "simulate": "generate a series from the model and simulate sections",
        "fit": "fit the configured model to data",
        "select": "compare candidate orders by EBIC, DIC and LPML",
        "forecast": "fit, then forecast with credible intervals",
        "residuals": "fit, then compute randomised quantile residuals",
        "study": "run a Monte-Carlo estimation or selection study",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="YAML run configuration (defaults when omitted)")
        p.add_argument("--seed", type=int, help="override the command's seed")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        if name not in ("simulate", "study"):
            p.add_argument("--data", help="CSV data file (overrides data.path)")
    return parser


def _error_record(exc: BaseException, status: int) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_status": status})


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and write its files; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a command is required")
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        print(_error_record(exc, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        print(_error_record(exc, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE
    try:
        results = _HANDLERS[args.command](cfg, args)
        emit_report(results, args.out)
    except ConfigError as exc:
        print(_error_record(exc, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE
    except (GarmaError, OSError) as exc:
        print(_error_record(exc, EXIT_RUNTIME), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run_command())


# --- helpers ---------------------------------------------------------------

def _load_data(cfg: RunConfig, args) -> CountSeries:
    path = args.data or cfg.data.path
    if not path:
        raise ConfigError("no data file: set data.path or pass --data")
    return load_series(path, cfg.data.y_column, cfg.data.scale_divisor, cfg.covariates())


def _mcmc(cfg: RunConfig, args):
    return cfg.mcmc_config(args.seed)


def _model_summary(spec: ModelSpec) -> dict:
    fam = spec.family
    return {"family": fam.tag, "size": fam.size, "dispersion": fam.dispersion,
            "p": spec.p, "q": spec.q, "covariates": [c.name for c in spec.covariates],
            "predictor_form": spec.predictor_form, "clamp": spec.clamp}


def _geweke_z(draws: np.ndarray) -> list:
    try:
        return [float(z) for z in geweke(draws).z]
    except (DomainError, DegenerateChainError) as exc:
        warnings.warn(f"Geweke diagnostic unavailable: {exc}", RuntimeWarning)
        return [None] * draws.shape[1]


def fit_summary(spec: ModelSpec, series: CountSeries, sample: PosteriorSample) -> dict:
    """Posterior means, variances, 95% equal-tail credible intervals, AP, Geweke z, criteria."""
    draws = sample.draws
    lo, hi = np.quantile(draws, [0.025, 0.975], axis=0)
    var = draws.var(axis=0, ddof=1) if sample.Q > 1 else np.full(spec.dim, np.nan)
    z = _geweke_z(draws)
    params = []
    for j, name in enumerate(spec.param_names()):
        params.append({"name": name, "mean": float(draws[:, j].mean()),
                       "variance": float(var[j]),
                       "credible_interval": [float(lo[j]), float(hi[j])],
                       "geweke_z": z[j]})
    report = criteria_report(spec, series, sample)
    return {"model": _model_summary(spec), "n": series.n, "Q": sample.Q,
            "parameters": params, "ap": acceptance_rate(sample), "geweke_z": z,
            "criteria": report.as_dict(), "map_estimate": list(sample.map_estimate)}


def _estimates_table(summary: dict) -> Table:
    rows = [[p["name"], p["mean"], p["variance"], p["credible_interval"][0],
             p["credible_interval"][1], p["geweke_z"]] for p in summary["parameters"]]
    return Table(["parameter", "mean", "variance", "lower", "upper", "geweke_z"], rows)


def _fit(cfg: RunConfig, args):
    spec = cfg.model_spec()
    series = _load_data(cfg, args)
    sample = mh_sample(spec, cfg.prior_spec(), series, _mcmc(cfg, args))
    return spec, series, sample


# --- commands --------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> Results:
    spec = cfg.model_spec()
    params = cfg.sim_params()
    s = cfg.simulate
    seed = s.seed if args.seed is None else args.seed
    try:
        sim = SimConfig(spec, params, s.n, s.burn_in_sim, seed)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    series = simulate_series(sim)
    rows = [[t, int(y)] for t, y in enumerate(series.y, start=1)]
    return Results("simulate", {
        "model": _model_summary(spec), "n": series.n, "burn_in_sim": s.burn_in_sim,
        "seed": seed, "truth": dict(zip(spec.param_names(), params.flat().tolist())),
        "mean_y": float(series.y.mean())}, {"series": Table(["t", "y"], rows)})


def cmd_fit(cfg: RunConfig, args) -> Results:
    spec, series, sample = _fit(cfg, args)
    summary = fit_summary(spec, series, sample)
    return Results("fit", summary, {"draws": draws_table(spec.param_names(), sample.draws),
                                    "estimates": _estimates_table(summary)})


def _order_label(order) -> str:
    return f"({order[0]},{order[1]})"


def cmd_select(cfg: RunConfig, args) -> Results:
    base = cfg.model_spec()
    series = _load_data(cfg, args)
    orders = [tuple(o) for o in cfg.select.orders]
    if len(set(orders)) != len(orders):
        raise ConfigError("select.orders must be distinct")
    reports, _ = fit_candidates(base, cfg.prior_spec(), series, orders, _mcmc(cfg, args),
                                cfg.select.common_window)
    chosen = select(reports)
    labels = [_order_label(o) for o in orders]
    rows = [["EBIC"] + [reports[o].ebic for o in orders],
            ["DIC"] + [reports[o].dic for o in orders],
            ["LPML"] + [reports[o].lpml for o in orders]]
    summary = {
        "model": _model_summary(base), "n": series.n,
        "criteria": {_order_label(o): reports[o].as_dict() for o in orders},
        "selected": {k: list(v) for k, v in chosen.items()},
    }
    return Results("select", summary, {"selection": Table(["criterion"] + labels, rows)})


def cmd_forecast(cfg: RunConfig, args) -> Results:
    spec, series, sample = _fit(cfg, args)
    request = cfg.forecast_request()
    fc = forecast(spec, sample, series, request)
    rows = [[h + 1, fc.point[h], int(fc.lower[h]), int(fc.upper[h])]
            for h in range(request.horizon)]
    tables = {"draws": draws_table(spec.param_names(), sample.draws),
              "forecast": Table(["h", "point", "lower", "upper"], rows)}
    if cfg.forecast.density_csv:
        drows = [[d.h, int(y), float(p)] for d in fc.densities for y, p in zip(d.support, d.prob)]
        tables["densities"] = Table(["h", "y", "prob"], drows)
    summary = {
        "model": _model_summary(spec), "n": series.n, "Q": sample.Q,
        "ap": acceptance_rate(sample), "level": request.level,
        "interval_mode": request.interval_mode, "excluded_draws": fc.excluded,
        "forecast": [{"h": r[0], "point": r[1], "lower": r[2], "upper": r[3]} for r in rows],
        "tail_mass_bound": [d.tail_mass_bound for d in fc.densities],
    }
    return Results("forecast", summary, tables)


def cmd_residuals(cfg: RunConfig, args) -> Results:
    spec, series, sample = _fit(cfg, args)
    seed = cfg.residuals.seed if args.seed is None else args.seed
    rep = quantile_residuals(spec, sample, series, seed=seed, max_lag=cfg.residuals.max_lag)
    t = series.t[spec.r:]
    summary = {"model": _model_summary(spec), "n": series.n, "seed": seed}
    summary.update(rep.summary())
    return Results("residuals", summary, {
        "residuals": Table(["t", "r_t"], [[int(a), float(b)] for a, b in zip(t, rep.residuals)])})


def cmd_study(cfg: RunConfig, args) -> Results:
    scfg = cfg.study_config(args.seed)
    if cfg.study.kind == "estimation":
        report = run_estimation_study(scfg)
        # long format: scenarios may have different parameter sets
        rows = [[_order_label(sc.order), i, name, float(v)]
                for sc in report.scenarios
                for i, est in enumerate(sc.estimates)
                for name, v in zip(sc.names, est)]
        table = Table(["order", "index", "parameter", "estimate"], rows)
    else:
        report = run_selection_study(scfg)
        rows = []
        for sc in report.scenarios:
            for i, ch in enumerate(sc.choices):
                rows.append([_order_label(sc.order), i] + [_order_label(ch[c]) for c in
                                                           ("ebic", "dic", "cpo")])
        table = Table(["order", "index", "ebic", "dic", "cpo"], rows)
    summary = report.to_dict()
    summary["master_seed"] = scfg.master_seed
    return Results("study", summary, {"estimates": table})


_HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "forecast": cmd_forecast,
    "residuals": cmd_residuals,
    "study": cmd_study,
}


if __name__ == "__main__":
    main()
