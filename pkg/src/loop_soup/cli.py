"""
Command-line interface for the loop soup engine.

This module provides the main CLI entry point with commands for:
- dim: Layering and winding dimension tables over a charge sweep
- corr: Plane correlators of up to four insertions
- halfplane: Upper half-plane one- and two-point functions
- blocks: Block-expansion coefficient extraction
- identities: Analytic identity self-checks
- mc: Monte Carlo verification runs

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure
(accuracy, degeneracy, singular input, failed identity), 4 inconclusive
Monte Carlo run.
"""

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .blocks import closed_form_C, extract_coefficients
from .charfn import (
    MarkDistribution,
    dimensions,
    distribution_from_record,
    distribution_label,
    distribution_to_record,
    parse_distribution,
)
from .config import RunConfig, load_run_config
from .correlators import CorrelatorConfig, evaluate
from .enums import Domain, ErrorCode, EstimatorKind, VertexKind
from .exceptions import (
    AccuracyError,
    ContractViolationError,
    DegeneracyError,
    DomainError,
    LoopSoupError,
    MCInconclusiveError,
    UnsupportedLabelError,
    ValidationError,
)
from .identities import IdentityChecker
from .models import BlockLabel, ChargedPoint, EstimatorResult
from .output import json_record, open_output, schema_name, write_csv, write_json
from .run_logger import RunLogger, create_logger
from .soup_mc import (
    LoopSoupSampler,
    TruncationShift,
    dump_loops,
    estimate_alpha_layering,
    estimate_subset_weights,
    estimate_vertex_onepoint,
    estimate_winding_weights,
    widened_config,
)


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INCONCLUSIVE = 4


@dataclass
class CommandOutput:
    """What a command hands to the writer."""

    payload: dict
    table: str
    rows: list = field(default_factory=list)
    exit_code: int = EXIT_OK


def parse_point(text: str) -> ChargedPoint:
    """
    Parse 'RE,IM' or 'RE,IM,BETA' into a ChargedPoint.

    Raises:
        ValidationError: on malformed input
    """
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 2:
            return ChargedPoint(z=complex(float(parts[0]), float(parts[1])), beta=0.0)
        if len(parts) == 3:
            return ChargedPoint(z=complex(float(parts[0]), float(parts[1])), beta=float(parts[2]))
    except ValueError:
        pass
    raise ValidationError(
        ErrorCode.INVALID_ARGUMENT.value,
        f"Point must be RE,IM or RE,IM,BETA, got {text!r}",
    )


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Effective configuration: the config file if given, overridden by flags.

    Raises:
        ConfigError: if the config file cannot be loaded
        ValidationError: on malformed flag values
    """
    if args.config:
        config = load_run_config(Path(args.config), args.command)
    else:
        config = RunConfig(command=args.command)

    if args.lam is not None:
        config.lam = args.lam
        config.mc.lam = args.lam
    if args.dist:
        config.distributions = [distribution_to_record(parse_distribution(text)) for text in args.dist]
    if args.point:
        config.points = [parse_point(text) for text in args.point]
    if args.seed is not None:
        config.seed = args.seed
        config.mc.seed = args.seed
    if args.out is not None:
        config.output_path = args.out
    if args.format is not None:
        config.output_format = args.format
    if args.log_level is not None:
        config.logging.level = args.log_level
    if args.log_format is not None:
        config.logging.output_format = args.log_format

    overrides = {
        "beta_min": (config.sweep, "beta_min"),
        "beta_max": (config.sweep, "beta_max"),
        "steps": (config.sweep, "steps"),
        "pmax": (config.blocks, "pmax"),
        "order": (config.blocks, "order"),
        "compare": (config.blocks, "compare"),
        "samples": (config.identities, "samples"),
        "inject_fault": (config.identities, "inject_fault"),
        "estimator": (config.estimator, "kind"),
        "k": (config.estimator, "windings"),
        "beta": (config.estimator, "beta"),
        "truncation_shift": (config.estimator, "truncation_shift"),
        "delta": (config.mc, "delta"),
        "radius": (config.mc, "radius"),
        "bridge_steps": (config.mc, "steps"),
        "n_soups": (config.mc, "n_soups"),
        "batch_size": (config.mc, "batch_size"),
        "workers": (config.mc, "workers"),
        "grid_divisions": (config.mc, "grid_divisions"),
        "duration_margin": (config.mc, "duration_margin"),
        "refine_levels": (config.mc, "refine_levels"),
    }
    for name, (section, attribute) in overrides.items():
        value = getattr(args, name, None)
        if value is not None:
            setattr(section, attribute, value)
    return config


def _distributions(config: RunConfig) -> list[MarkDistribution]:
    if not config.distributions:
        raise ValidationError(ErrorCode.INVALID_CONFIG.value, "At least one distribution is required")
    return [distribution_from_record(record) for record in config.distributions]


def _correlator_config(config: RunConfig, domain: Domain) -> CorrelatorConfig:
    return CorrelatorConfig(lam=config.lam, dist=_distributions(config)[0], points=list(config.points), domain=domain)


def cmd_dim(config: RunConfig, logger: RunLogger) -> CommandOutput:
    """Handle the 'dim' command."""
    sweep = config.sweep
    if sweep.steps < 1 or not sweep.beta_max >= sweep.beta_min:
        raise ValidationError(
            ErrorCode.INVALID_CONFIG.value,
            f"Empty sweep: steps={sweep.steps}, range=[{sweep.beta_min}, {sweep.beta_max}]",
        )
    betas = np.linspace(sweep.beta_min, sweep.beta_max, sweep.steps)
    rows = []
    records = []
    for dist in _distributions(config):
        label = distribution_label(dist)
        for beta in betas:
            dims = dimensions(config.lam, dist, float(beta))
            rows.append((label, float(beta), dims.delta, dims.delta_w))
            records.append({"distribution": label, "beta": float(beta), "delta": dims.delta, "delta_w": dims.delta_w})
        logger.info("dim", "Sweep complete", {"distribution": label, "points": len(betas)})
    return CommandOutput(payload={"rows": records}, table="dim", rows=rows)


def _correlator_output(config: RunConfig, domain: Domain, table: str) -> CommandOutput:
    cfg = _correlator_config(config, domain)
    result = evaluate(cfg)
    return CommandOutput(
        payload={"result": result.to_dict()},
        table=table,
        rows=[(len(cfg.points), result.value, result.flags)],
    )


def cmd_corr(config: RunConfig, logger: RunLogger) -> CommandOutput:
    """Handle the 'corr' command."""
    return _correlator_output(config, Domain.PLANE, "corr")


def cmd_halfplane(config: RunConfig, logger: RunLogger) -> CommandOutput:
    """Handle the 'halfplane' command."""
    return _correlator_output(config, Domain.UPPER_HALF_PLANE, "halfplane")


def cmd_blocks(config: RunConfig, logger: RunLogger) -> CommandOutput:
    """Handle the 'blocks' command."""
    cfg = _correlator_config(config, Domain.PLANE)
    table = extract_coefficients(cfg, config.blocks.pmax, config.blocks.order, logger=logger)
    records = []
    rows = []
    for p, p_bar, delta, delta_bar, coeff, residual in table.rows():
        record = {"p": p, "p_bar": p_bar, "delta": delta, "delta_bar": delta_bar, "coeff": coeff}
        row = [p, p_bar, delta, delta_bar, coeff, residual]
        if config.blocks.compare:
            try:
                closed = closed_form_C(BlockLabel(p, p_bar), cfg)
            except UnsupportedLabelError:
                closed = None
            record["closed_form"] = closed
            row.append(closed)
        records.append(record)
        rows.append(row)
    payload = {
        "delta12": table.delta12,
        "order": table.order,
        "pmax": table.pmax,
        "residual": table.residual,
        "condition_number": table.condition_number,
        "coefficients": records,
    }
    return CommandOutput(payload=payload, table="blocks-compare" if config.blocks.compare else "blocks", rows=rows)


def cmd_identities(config: RunConfig, logger: RunLogger) -> CommandOutput:
    """Handle the 'identities' command."""
    checker = IdentityChecker(
        seed=config.seed,
        samples=config.identities.samples,
        inject_fault=config.identities.inject_fault,
        logger=logger,
    )
    report = checker.run()
    checker.print_results(report, stream=sys.stderr)
    rows = [(c.name, c.passed, c.max_deviation, c.tolerance, c.samples) for c in report.checks]
    if not report.success:
        logger.log_error(
            "identities",
            "Identity checks failed",
            additional_data={"failed": [c.name for c in report.failed_checks]},
        )
    return CommandOutput(
        payload=report.to_dict(),
        table="identities",
        rows=rows,
        exit_code=EXIT_OK if report.success else EXIT_NUMERIC,
    )


def _mc_runner(config: RunConfig, logger: RunLogger) -> Callable[..., dict[str, EstimatorResult]]:
    kind = EstimatorKind(config.estimator.kind)
    points = [p.z for p in config.points]
    if not points:
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "The mc command needs at least one --point")
    z = points[0]

    def run(mc) -> dict[str, EstimatorResult]:
        args = (mc.delta, mc.radius, mc.n_soups, mc, logger)
        if kind is EstimatorKind.ALPHA:
            return {"alpha": estimate_alpha_layering(z, *args)}
        if kind is EstimatorKind.WINDING:
            results = estimate_winding_weights(z, config.estimator.windings, *args)
            return {f"k={k}": result for k, result in results.items()}
        if kind is EstimatorKind.SUBSETS:
            results = estimate_subset_weights(points, *args)
            return {"S=" + "+".join(str(i) for i in subset): result for subset, result in results.items()}
        vertex = VertexKind.LAYERING if kind is EstimatorKind.VERTEX_LAYERING else VertexKind.WINDING
        dist = _distributions(config)[0]
        return {f"beta={config.estimator.beta:g}": estimate_vertex_onepoint(vertex, dist, config.estimator.beta, z, *args)}

    return run


def cmd_mc(config: RunConfig, logger: RunLogger) -> CommandOutput:
    """Handle the 'mc' command."""
    run = _mc_runner(config, logger)
    results = run(config.mc)
    records = []
    rows = []
    for key, result in results.items():
        record = {"key": key}
        record.update(result.to_dict())
        records.append(record)
        rows.append(
            (
                config.estimator.kind,
                key,
                result.mean,
                result.stderr,
                result.n_samples,
                result.diagnostics.get("target"),
                result.diagnostics.get("z_score"),
            )
        )
    payload = {"estimator": config.estimator.kind, "results": records}
    if config.estimator.truncation_shift:
        widened = run(widened_config(config.mc))
        shifts = {}
        for key, result in results.items():
            shift = TruncationShift(base=result, widened=widened[key])
            shifts[key] = {"widened_estimate": shift.widened.mean, "shift": shift.shift, "shift_stderr": shift.stderr}
        payload["truncation_shift"] = shifts
    return CommandOutput(payload=payload, table="mc", rows=rows)


def _write_partials(path: str, config: RunConfig, payload: dict) -> None:
    rows = []
    for record in payload["results"]:
        for batch, soups, mean in record["diagnostics"].get("batch_partials", []):
            rows.append((config.estimator.kind, record["key"], batch, soups, mean))
    with open_output(path) as stream:
        write_csv("mc-partials", rows, stream, schema=schema_name("mc-partials"))


def _dump_soup(path: str, config: RunConfig, logger: RunLogger) -> None:
    points = [p.z for p in config.points]
    dist = _distributions(config)[0]
    sample = LoopSoupSampler(config.mc, dist=dist, logger=logger).sample_one(points)
    count = dump_loops(path, sample.loops)
    logger.info("mc", "Loop dump written", {"path": path, "loops": count})


COMMAND_HANDLERS: dict[str, Callable[[RunConfig, RunLogger], CommandOutput]] = {
    "dim": cmd_dim,
    "corr": cmd_corr,
    "halfplane": cmd_halfplane,
    "blocks": cmd_blocks,
    "identities": cmd_identities,
    "mc": cmd_mc,
}


def emit(config: RunConfig, output: CommandOutput) -> None:
    """Write the command output in the configured format."""
    stream = open_output(config.output_path)
    try:
        if config.output_format == "csv":
            schema = schema_name(config.command)
            write_csv(output.table, output.rows, stream, schema=schema)
        else:
            write_json(json_record(config, output.payload), stream)
    finally:
        if stream is not sys.stdout:
            stream.close()


def exit_code_for(error: LoopSoupError) -> int:
    """Map an error to the documented exit code."""
    if isinstance(error, MCInconclusiveError):
        return EXIT_INCONCLUSIVE
    if isinstance(error, (AccuracyError, DegeneracyError, DomainError, ContractViolationError)):
        return EXIT_NUMERIC
    return EXIT_USAGE


def run_command(args: argparse.Namespace) -> int:
    """Build the configuration, run the command and write its output."""
    logger: Optional[RunLogger] = None
    try:
        config = build_config(args)
        logger = create_logger(config.logging.level, config.logging.output_format)
        output = COMMAND_HANDLERS[config.command](config, logger)
        emit(config, output)
        if config.command == "mc":
            if getattr(args, "partials", None):
                _write_partials(args.partials, config, output.payload)
            if getattr(args, "dump_loops", None):
                _dump_soup(args.dump_loops, config, logger)
        return output.exit_code
    except LoopSoupError as e:
        code = exit_code_for(e)
        if logger:
            logger.log_error("cli", f"{args.command} failed", e)
        write_json({"schema": schema_name("error"), "error": e.to_dict(), "exit_code": code}, sys.stderr)
        return code
    except ValueError as e:
        # invalid log level, estimator kind or similar enum value
        error = ValidationError(ErrorCode.INVALID_ARGUMENT.value, str(e))
        write_json({"schema": schema_name("error"), "error": error.to_dict(), "exit_code": EXIT_USAGE}, sys.stderr)
        return EXIT_USAGE


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="Path to JSON configuration file")
    common.add_argument("--lambda", dest="lam", type=float, help="Loop soup intensity (c = 2 lambda)")
    common.add_argument(
        "--dist",
        action="append",
        help="Mark distribution: bernoulli, gaussian:SIGMA, unit-vector:D or a JSON record",
    )
    common.add_argument("--point", action="append", help="Insertion RE,IM,BETA (repeatable)")
    common.add_argument("--seed", type=int, help="Random seed (default: 0)")
    common.add_argument("--out", "-o", help="Output path (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], help="Output format (default: json)")
    common.add_argument("--log-level", choices=["debug", "info", "warn", "error"], help="Minimum log level")
    common.add_argument("--log-format", choices=["json", "text", "both"], help="Log format on stderr")
    return common


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="loop-soup",
        description="Brownian loop soup correlators, conformal blocks and Monte Carlo checks",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    common = _common_options()
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    dim_parser = subparsers.add_parser("dim", parents=[common], help="Dimension table over a charge sweep")
    dim_parser.add_argument("--beta-min", type=float, help="First charge (default: 0)")
    dim_parser.add_argument("--beta-max", type=float, help="Last charge (default: 2 pi)")
    dim_parser.add_argument("--steps", type=int, help="Grid points (default: 65)")

    subparsers.add_parser("corr", parents=[common], help="Plane correlator of 1 to 4 insertions")
    subparsers.add_parser("halfplane", parents=[common], help="Upper half-plane 1- or 2-point function")

    blocks_parser = subparsers.add_parser("blocks", parents=[common], help="Extract block-expansion coefficients")
    blocks_parser.add_argument("--pmax", type=int, help="Largest label p, p' (default: 5)")
    blocks_parser.add_argument("--order", type=int, help="Powers of x in the expansion (default: 4)")
    blocks_parser.add_argument(
        "--compare",
        action="store_true",
        default=None,
        help="Print closed forms next to extracted values",
    )

    identities_parser = subparsers.add_parser("identities", parents=[common], help="Run identity self-checks")
    identities_parser.add_argument("--samples", type=int, help="Random configurations per check (default: 20)")
    identities_parser.add_argument(
        "--inject-fault",
        action="store_true",
        default=None,
        help="Perturb mu by 1e-3; the crossing check must fail",
    )

    mc_parser = subparsers.add_parser("mc", parents=[common], help="Monte Carlo verification run")
    mc_parser.add_argument("--estimator", choices=[k.value for k in EstimatorKind], help="Estimator (default: alpha)")
    mc_parser.add_argument("--k", type=int, action="append", help="Winding number (repeatable, default: 1)")
    mc_parser.add_argument("--beta", type=float, help="Charge of the vertex estimators (default: pi)")
    mc_parser.add_argument("--delta", type=float, help="Smallest loop diameter (default: 1)")
    mc_parser.add_argument("--radius", type=float, help="Diameter cutoff R (default: e)")
    mc_parser.add_argument("--bridge-steps", type=int, help="Vertices per loop, power of two (default: 1024)")
    mc_parser.add_argument("--n-soups", type=int, help="Number of soups (default: 20000)")
    mc_parser.add_argument("--batch-size", type=int, help="Soups per batch (default: 250)")
    mc_parser.add_argument("--workers", type=int, help="Worker processes (default: 1)")
    mc_parser.add_argument("--grid-divisions", type=int, help="Flood-fill cells per delta (default: 50)")
    mc_parser.add_argument("--duration-margin", type=float, help="Duration window margin (default: 10)")
    mc_parser.add_argument(
        "--refine-levels", type=int, help="Midpoint refinement passes near the points, 0 to disable (default: 12)"
    )
    mc_parser.add_argument(
        "--truncation-shift",
        action="store_true",
        default=None,
        help="Rerun with a 4x wider duration window and report the shift",
    )
    mc_parser.add_argument("--partials", help="Write per-batch means as CSV to this path")
    mc_parser.add_argument("--dump-loops", help="Write one soup in the loop-dump format to this path")

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        argv: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
