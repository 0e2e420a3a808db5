"""Command-line interface.

Subcommands ``fit``, ``analyze``, ``simulate`` and ``invert-laplace`` each
read a JSON config and write JSON/CSV artifacts into ``--out``.

Exit codes: 0 success, 1 bad config or input, 2 infeasible moments,
3 solver failure (non-convergence, singular covariance, failed reference fit).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import MomentBasis, SampleSet, estimate_moments, sample_covariance
from .exceptions import (
    ConditioningError,
    ConfigurationError,
    InfeasibleError,
    InputError,
    MaxentError,
    NonConvergenceError,
    NumericError,
)
from .experiment import ExperimentConfig, clt_normality_check, run_replicates, validate_bounds
from .quadrature import DEFAULT_QUAD_POINTS, EXPONENTIAL, SupportSpec, build_rule
from .sensitivity import DEFAULT_Z, analyze as sensitivity_analyze
from .serialization import (
    density_grid,
    model_to_dict,
    read_json,
    validate,
    write_band_csv,
    write_density_csv,
    write_json,
    write_replicates_csv,
)
from .solver import SolverOptions, fit

log = logging.getLogger("maxentsd")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 1, 2, 3
DEFAULT_GRID_POINTS = 512


def _quad(args, doc):
    return args.quad_points or doc.get("quad_points", DEFAULT_QUAD_POINTS)


def _grid(args, doc):
    return args.grid_points or doc.get("grid_points", DEFAULT_GRID_POINTS)


def _fit_and_write(args, doc, d, basis, support, out: Path):
    opts = SolverOptions.from_dict(doc.get("solver"))
    rule = build_rule(support, _quad(args, doc))
    model = fit(d, basis, support, opts, rule=rule)
    log.info("converged in %d Newton steps, |grad|_inf = %.3e", model.iterations, model.grad_norm)
    write_json(out / "model.json", model_to_dict(model))
    write_density_csv(out / "density.csv", model, density_grid(support, _grid(args, doc), doc.get("grid_max")))
    return model


def cmd_fit(args, doc, out: Path) -> int:
    validate(doc, "fit")
    support = SupportSpec.from_dict(doc["support"])
    basis = MomentBasis.from_dict(doc["basis"])
    _fit_and_write(args, doc, doc["moments"], basis, support, out)
    return EXIT_OK


def cmd_invert_laplace(args, doc, out: Path) -> int:
    validate(doc, "invert_laplace")
    alphas = np.asarray(doc["alphas"], dtype=float)
    values = np.asarray(doc["values"], dtype=float)
    if alphas.size != values.size:
        raise ConfigurationError("alphas and values must have the same length")
    order = np.argsort(alphas, kind="stable")
    basis = MomentBasis.exponentials(alphas[order])
    support = SupportSpec.half_line(doc.get("a", 0.0), doc.get("scale", 1.0), doc.get("measure", EXPONENTIAL))
    model = _fit_and_write(args, doc, values[order], basis, support, out)
    log.info("reproduced transform values %s", model.reproduced_moments().tolist())
    return EXIT_OK


def cmd_analyze(args, doc, out: Path) -> int:
    validate(doc, "analyze")
    support = SupportSpec.from_dict(doc["support"])
    basis = MomentBasis.from_dict(doc["basis"])
    csv_path = Path(doc["sample_csv"])
    if not csv_path.is_absolute():
        csv_path = args.config.parent / csv_path
    sample = SampleSet.from_csv(csv_path, support)
    if sample.N < 2:
        raise InputError(f"analyze needs at least 2 sample values to estimate Sigma(h), got {sample.N}")
    d_hat = estimate_moments(basis, sample)
    sigma_h = sample_covariance(basis, sample)
    write_json(out / "moments.json", {"N": sample.N, "d_hat": d_hat.tolist(), "sigma_h": sigma_h.tolist()})
    model = _fit_and_write(args, doc, d_hat, basis, support, out)
    report = sensitivity_analyze(model, sigma_h, N=sample.N)
    write_json(out / "sensitivity.json", report.to_dict())
    x = density_grid(support, _grid(args, doc), doc.get("grid_max"))
    write_band_csv(out / "band.csv", report.band(x, z=float(doc.get("z", DEFAULT_Z))))
    return EXIT_OK


def cmd_simulate(args, doc, out: Path) -> int:
    validate(doc, "simulate")
    if args.seed is not None:
        doc = {**doc, "seed": args.seed}
    if args.quad_points:
        doc = {**doc, "quad_points": args.quad_points}
    config = ExperimentConfig.from_dict(doc)
    try:
        result = run_replicates(config)
    except MaxentError as exc:
        if isinstance(exc, (ConfigurationError, InputError)):
            raise
        log.error("reference fit failed: %s", exc)
        return EXIT_SOLVER
    write_replicates_csv(out / "replicates.csv", result)
    largest = result.cells[-1]
    normality = [clt_normality_check(result, x, largest.N) for x in config.grid_points]
    write_json(
        out / "aggregate.json",
        {
            "config": config.to_dict(),
            "aggregate": result.aggregate,
            "bounds": validate_bounds(result),
            "normality": normality,
        },
    )
    failed = sum(a["failed"] for a in result.aggregate["per_N"])
    if failed:
        log.warning("%d replicate fits failed (see failure_causes in aggregate.json)", failed)
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "invert-laplace": cmd_invert_laplace,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxentsd",
        description="Maximum entropy density reconstruction from moments and its sample dependence.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "fit a maximum entropy density to given moments"),
        ("analyze", "estimate moments from a sample, fit, and report sensitivity"),
        ("simulate", "run the Monte Carlo sample-dependence experiment"),
        ("invert-laplace", "recover a density on [a, inf) from Laplace transform values"),
    ):
        p = sub.add_parser(name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--config", type=Path, required=True, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--grid-points", type=int, default=None, help="density grid resolution")
        p.add_argument("--quad-points", type=int, default=None, help="quadrature nodes")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--verbose", "-v", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.quad_points is not None and args.quad_points < 2:
            raise ConfigurationError("--quad-points must be at least 2")
        if args.grid_points is not None and args.grid_points < 2:
            raise ConfigurationError("--grid-points must be at least 2")
        doc = read_json(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, doc, args.out)
    except (ConfigurationError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NonConvergenceError, ConditioningError, NumericError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
