"""Command-line front end: ``freeknot <experiment> [options]``.

Settings come from defaults, then an optional flat JSON file (``--config``),
then command-line flags, each overriding the previous. Exit status is 0 on
success, 2 for configuration errors and 3 for numeric failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .core import build_spline, spline_error
from .diffusion import diffusion_rate_study
from .estimators import uniform_path
from .exceptions import ConfigError, InvalidArgumentError, NumericFailure, OutOfRangeError
from .experiments import (McConfig, avg_knot_rate_study, estimate_eta_kappa, estimate_tau,
                          exponential_sampler, negative_moment_study, rate_study,
                          small_deviation_study, xi_structure_check)
from .paths import sde_preset
from .report import ExperimentReport, read_path_csv, write_spline_file

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
WORKERS_ENV = "FREEKNOT_WORKERS"

EXPERIMENTS = ("tau", "rate", "avg-knots", "xi-check", "smalldev", "negmom",
               "eta-kappa", "diffusion", "approximate-file")

DEFAULTS = {
    "r": 0, "s": 0, "p": math.inf, "q": 1.0, "k": 8,
    "k_list": [4, 8, 16, 32, 64], "epsilon": 1.0, "epsilon_list": None,
    "j_max": 5, "alpha": 1.0, "sampler": "exp", "const_value": 1.0,
    "sde": "ou-sine", "p1": 1.0, "p2": 2.0, "input": None, "spline_out": None,
    "replicates": 1000, "seed": None, "grid_n": 4096, "horizon_T": 2.0,
    "horizon_cap": 64.0, "workers": None, "out": ".", "format": "csv",
}

# experiment-specific defaults that differ from DEFAULTS
EXPERIMENT_DEFAULTS = {
    "avg-knots": {"epsilon_list": [0.4, 0.2, 0.1, 0.05]},
    "smalldev": {"epsilon_list": [0.32, 0.34, 0.36, 0.38, 0.40], "grid_n": 1024},
    "negmom": {"k_list": [1, 10, 100, 1000]},
    "eta-kappa": {"p": 2.0, "grid_n": 256},
    "xi-check": {"grid_n": 1024},
}

MC_KEYS = ("replicates", "seed", "grid_n", "horizon_T", "horizon_cap", "workers")


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freeknot", description="Free-knot spline approximation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    g = parser.add_argument_group("run")
    g.add_argument("--config", help="flat JSON file with settings")
    g.add_argument("--out", help="output directory (default: current)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--seed", type=int)
    g.add_argument("--replicates", type=int)
    g.add_argument("--grid-n", dest="grid_n", type=int, help="grid steps per unit time")
    g.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    g.add_argument("--horizon-T", dest="horizon_T", type=float)
    g.add_argument("--horizon-cap", dest="horizon_cap", type=float)
    m = parser.add_argument_group("model")
    m.add_argument("--r", type=int, help="polynomial degree")
    m.add_argument("--s", type=int, help="integration order of the Wiener process")
    m.add_argument("--p", type=float, help="norm index, 'inf' for the sup norm")
    m.add_argument("--q", type=float, help="averaging exponent")
    m.add_argument("--k", type=int, help="piece count (approximate-file)")
    m.add_argument("--k-list", dest="k_list", type=_int_list, help="comma separated")
    m.add_argument("--epsilon", type=float)
    m.add_argument("--epsilon-list", dest="epsilon_list", type=_float_list)
    m.add_argument("--j-max", dest="j_max", type=int)
    m.add_argument("--alpha", type=float)
    m.add_argument("--sampler", choices=("exp", "const"))
    m.add_argument("--const-value", dest="const_value", type=float)
    m.add_argument("--sde", help="SDE preset: wiener, ou-sine, mean-tanh")
    m.add_argument("--p1", type=float)
    m.add_argument("--p2", type=float)
    m.add_argument("--input", help="two-column time,value CSV (approximate-file)")
    m.add_argument("--spline-out", dest="spline_out", help="spline file to write")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON config file and flags (flags win)."""
    settings = dict(DEFAULTS)
    settings.update(EXPERIMENT_DEFAULTS.get(args.experiment, {}))
    if args.config:
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a flat JSON object")
        unknown = sorted(set(from_file) - set(DEFAULTS) - {"experiment"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if from_file.get("experiment", args.experiment) != args.experiment:
            raise ConfigError("config file names a different experiment")
        from_file.pop("experiment", None)
        settings.update(from_file)
    for key, value in vars(args).items():
        if key in settings and value is not None:
            settings[key] = value
    if settings["workers"] is None:
        env = os.environ.get(WORKERS_ENV)
        try:
            settings["workers"] = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if settings["seed"] is None:
        settings["seed"] = int(np.random.SeedSequence().entropy % (2 ** 63))
    settings["p"] = float(settings["p"])
    return settings


def mc_config(settings: dict) -> McConfig:
    return McConfig(**{k: settings[k] for k in MC_KEYS})


def _sampler(settings):
    if settings["sampler"] == "exp":
        return exponential_sampler
    c = float(settings["const_value"])
    return lambda gen, size: np.full(size, c)


def run_study(experiment: str, st: dict):
    cfg = mc_config(st)
    r, s, p = st["r"], st["s"], st["p"]
    if experiment == "tau":
        return estimate_tau(r, s, p, cfg, epsilon=st["epsilon"])
    if experiment == "rate":
        return rate_study(s, r, p, st["k_list"], cfg, q=st["q"])
    if experiment == "avg-knots":
        return avg_knot_rate_study(r, s, p, st["epsilon_list"], cfg)
    if experiment == "xi-check":
        return xi_structure_check(r, s, p, st["epsilon"], st["j_max"], cfg)
    if experiment == "smalldev":
        return small_deviation_study(r, s, p, st["epsilon_list"], cfg)
    if experiment == "negmom":
        return negative_moment_study(_sampler(st), st["alpha"], st["k_list"], cfg)
    if experiment == "eta-kappa":
        return estimate_eta_kappa(p, st["p1"], st["p2"], sde_preset(st["sde"]), cfg)
    if experiment == "diffusion":
        return diffusion_rate_study(sde_preset(st["sde"]), st["k_list"], p, st["q"], cfg)
    raise ConfigError(f"unknown experiment {experiment!r}")


def _echo(settings):
    return {k: (v if not (isinstance(v, float) and math.isinf(v)) else "inf")
            for k, v in settings.items()}


def run(experiment: str, settings: dict, out=None) -> int:
    """Run one experiment with resolved settings and write its report."""
    out = out or sys.stdout
    t0 = time.perf_counter()
    echo = _echo(settings)
    try:
        study = run_study(experiment, settings)
    except NumericFailure as exc:
        rep = ExperimentReport(experiment, __version__, settings["seed"], echo,
                               status="numeric-failure", message=str(exc),
                               wall_time=time.perf_counter() - t0)
        rep.write(settings["out"], "json")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rep = ExperimentReport.from_study(study, experiment, __version__, settings["seed"], echo,
                                      time.perf_counter() - t0)
    for path in rep.write(settings["out"], settings["format"]):
        print(path, file=out)
    return EXIT_OK


def approximate_file(settings: dict, out=None) -> int:
    out = out or sys.stdout
    if not settings["input"]:
        raise ConfigError("approximate-file needs --input")
    t, v = read_path_csv(settings["input"])
    path = uniform_path(t, v)
    k, r, p = settings["k"], settings["r"], settings["p"]
    try:
        spline, gamma = build_spline(path, k, r, p)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    err = spline_error(path, spline, p)
    target = settings["spline_out"] or os.path.join(settings["out"], "spline.csv")
    os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
    write_spline_file(target, spline, r, p, gamma)
    print(f"pieces={spline.k} gamma={gamma!r} error={err!r} spline={target}", file=out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        settings = resolve_settings(args)
        if args.experiment == "approximate-file":
            return approximate_file(settings)
        return run(args.experiment, settings)
    except (ConfigError, InvalidArgumentError, OutOfRangeError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
