"""
Configuration dataclasses for the loop soup engine.

This module defines the configuration structures used by the CLI and the
library entry points: dimension sweeps, block extraction, Monte Carlo runs,
identity checks, logging, and the aggregate run configuration echoed into
every output. JSON files are the canonical reproducibility artifact; the
loader and writer here round-trip that structure.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .enums import ErrorCode
from .exceptions import ConfigError
from .models import ChargedPoint


COMMANDS = ("dim", "corr", "halfplane", "blocks", "identities", "mc")


@dataclass
class SweepConfig:
    """Grid of charges for dimension tables."""

    beta_min: float = 0.0
    beta_max: float = 2.0 * math.pi
    steps: int = 65  # number of grid points, endpoints included


@dataclass
class BlockConfig:
    """Conformal block extraction settings."""

    pmax: int = 5
    order: int = 4  # integer powers of x kept in the G(x) expansion
    compare: bool = False


@dataclass
class MCConfig:
    """Monte Carlo sampler configuration."""

    lam: float = 1.0
    delta: float = 1.0
    radius: float = math.e  # long-distance diameter cutoff R
    steps: int = 1024  # bridge vertices M, power of two
    n_soups: int = 20000
    batch_size: int = 250
    workers: int = 1
    seed: int = 0
    grid_divisions: int = 50  # flood-fill resolution h = delta / grid_divisions
    duration_margin: float = 10.0  # durations on [(delta/m)^2, (m R)^2]
    indeterminate_limit: float = 0.01
    refine_levels: int = 12  # midpoint refinement passes near observation points; 0 disables


@dataclass
class EstimatorConfig:
    """Which Monte Carlo estimator the mc command runs."""

    kind: str = "alpha"  # alpha, winding, vertex-layering, vertex-winding, subsets
    windings: list[int] = field(default_factory=lambda: [1])
    beta: float = math.pi
    truncation_shift: bool = False


@dataclass
class IdentityConfig:
    """Identity self-check settings."""

    samples: int = 20
    inject_fault: bool = False


@dataclass
class LoggingConfig:
    """Logging configuration."""

    level: str = "info"
    output_format: str = "text"  # 'json', 'text', 'both'


@dataclass
class RunConfig:
    """Main run configuration combining all sub-configurations."""

    command: str
    lam: float = 1.0
    distributions: list[dict] = field(default_factory=lambda: [{"kind": "bernoulli"}])
    domain: str = "plane"
    points: list[ChargedPoint] = field(default_factory=list)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    blocks: BlockConfig = field(default_factory=BlockConfig)
    mc: MCConfig = field(default_factory=MCConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    identities: IdentityConfig = field(default_factory=IdentityConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    seed: int = 0
    output_format: str = "json"  # 'json' or 'csv'
    output_path: Optional[str] = None

    @property
    def distribution(self) -> dict:
        """The first (for most commands the only) distribution record."""
        return self.distributions[0]


def _points_from_data(items) -> list[ChargedPoint]:
    points = []
    for item in items:
        points.append(
            ChargedPoint(
                z=complex(float(item.get("re", 0.0)), float(item.get("im", 0.0))),
                beta=float(item.get("beta", 0.0)),
            )
        )
    return points


def run_config_from_dict(data: dict, command: Optional[str] = None) -> RunConfig:
    """
    Build a RunConfig from the JSON structure.

    Args:
        data: Parsed JSON object
        command: Command to run; overrides data["command"]

    Raises:
        ConfigError: on missing or malformed fields
    """
    try:
        command = command or data.get("command")
        if command not in COMMANDS:
            raise ConfigError(
                ErrorCode.INVALID_CONFIG.value,
                f"Unknown command {command!r}; expected one of {', '.join(COMMANDS)}",
            )

        distribution = data.get("distribution", {"kind": "bernoulli"})
        distributions = list(distribution) if isinstance(distribution, list) else [distribution]

        sweep_data = data.get("sweep", {})
        sweep = SweepConfig(
            beta_min=float(sweep_data.get("beta_min", 0.0)),
            beta_max=float(sweep_data.get("beta_max", 2.0 * math.pi)),
            steps=int(sweep_data.get("steps", 65)),
        )

        blocks_data = data.get("blocks", {})
        blocks = BlockConfig(
            pmax=int(blocks_data.get("pmax", 5)),
            order=int(blocks_data.get("order", 4)),
            compare=bool(blocks_data.get("compare", False)),
        )

        seed = int(data.get("seed", 0))
        lam = float(data.get("lambda", 1.0))
        mc_data = data.get("mc", {})
        mc = MCConfig(
            lam=float(mc_data.get("lambda", lam)),
            delta=float(mc_data.get("delta", 1.0)),
            radius=float(mc_data.get("radius", math.e)),
            steps=int(mc_data.get("steps", 1024)),
            n_soups=int(mc_data.get("n_soups", 20000)),
            batch_size=int(mc_data.get("batch_size", 250)),
            workers=int(mc_data.get("workers", 1)),
            seed=int(mc_data.get("seed", seed)),
            grid_divisions=int(mc_data.get("grid_divisions", 50)),
            duration_margin=float(mc_data.get("duration_margin", 10.0)),
            indeterminate_limit=float(mc_data.get("indeterminate_limit", 0.01)),
            refine_levels=int(mc_data.get("refine_levels", 12)),
        )

        estimator_data = data.get("estimator", {})
        estimator = EstimatorConfig(
            kind=str(estimator_data.get("kind", "alpha")),
            windings=[int(k) for k in estimator_data.get("windings", [1])],
            beta=float(estimator_data.get("beta", math.pi)),
            truncation_shift=bool(estimator_data.get("truncation_shift", False)),
        )

        identities_data = data.get("identities", {})
        identities = IdentityConfig(
            samples=int(identities_data.get("samples", 20)),
            inject_fault=bool(identities_data.get("inject_fault", False)),
        )

        logging_data = data.get("logging", {})
        logging_config = LoggingConfig(
            level=logging_data.get("level", "info"),
            output_format=logging_data.get("output_format", "text"),
        )

        return RunConfig(
            command=command,
            lam=lam,
            distributions=distributions,
            domain=data.get("domain", "plane"),
            points=_points_from_data(data.get("points", [])),
            sweep=sweep,
            blocks=blocks,
            mc=mc,
            estimator=estimator,
            identities=identities,
            logging=logging_config,
            seed=seed,
            output_format=data.get("format", "json"),
            output_path=data.get("output"),
        )
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(ErrorCode.INVALID_CONFIG.value, f"Malformed configuration: {e}") from e


def run_config_to_dict(config: RunConfig) -> dict:
    """The JSON structure of a RunConfig, as echoed into outputs."""
    distribution = config.distributions if len(config.distributions) > 1 else config.distribution
    return {
        "command": config.command,
        "lambda": config.lam,
        "distribution": distribution,
        "domain": config.domain,
        "points": [{"re": p.z.real, "im": p.z.imag, "beta": p.beta} for p in config.points],
        "sweep": {
            "beta_min": config.sweep.beta_min,
            "beta_max": config.sweep.beta_max,
            "steps": config.sweep.steps,
        },
        "blocks": {
            "pmax": config.blocks.pmax,
            "order": config.blocks.order,
            "compare": config.blocks.compare,
        },
        "mc": {
            "lambda": config.mc.lam,
            "delta": config.mc.delta,
            "radius": config.mc.radius,
            "steps": config.mc.steps,
            "n_soups": config.mc.n_soups,
            "batch_size": config.mc.batch_size,
            "workers": config.mc.workers,
            "seed": config.mc.seed,
            "grid_divisions": config.mc.grid_divisions,
            "duration_margin": config.mc.duration_margin,
            "indeterminate_limit": config.mc.indeterminate_limit,
            "refine_levels": config.mc.refine_levels,
        },
        "estimator": {
            "kind": config.estimator.kind,
            "windings": list(config.estimator.windings),
            "beta": config.estimator.beta,
            "truncation_shift": config.estimator.truncation_shift,
        },
        "identities": {
            "samples": config.identities.samples,
            "inject_fault": config.identities.inject_fault,
        },
        "logging": {
            "level": config.logging.level,
            "output_format": config.logging.output_format,
        },
        "seed": config.seed,
        "format": config.output_format,
        "output": config.output_path,
    }


def load_run_config(config_path: Path, command: Optional[str] = None) -> RunConfig:
    """
    Load a run configuration from a JSON file.

    Raises:
        ConfigError: if the file is missing, unreadable or malformed
    """
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(ErrorCode.INVALID_CONFIG.value, f"Config file not found: {config_path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(ErrorCode.INVALID_CONFIG.value, f"Error loading config {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(ErrorCode.INVALID_CONFIG.value, "Configuration must be a JSON object")
    return run_config_from_dict(data, command)


def save_run_config(config: RunConfig, config_path: Path) -> None:
    """
    Save a run configuration as JSON.

    Raises:
        ConfigError: if the file cannot be written
    """
    try:
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w", encoding="utf-8") as f:
            json.dump(run_config_to_dict(config), f, indent=2, ensure_ascii=False)
    except OSError as e:
        raise ConfigError(ErrorCode.INVALID_CONFIG.value, f"Error saving config {config_path}: {e}") from e
