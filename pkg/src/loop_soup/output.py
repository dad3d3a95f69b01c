"""
Machine-readable output records.

Every command writes either one JSON object carrying the schema name, the
effective configuration and its digest, or a CSV table whose first line is
a '# schema:' comment followed by a fixed header.
"""

import csv
import hashlib
import json
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from .config import RunConfig, run_config_to_dict
from .run_logger import json_default


SCHEMA_VERSION = 1

CSV_HEADERS = {
    "dim": ("distribution", "beta", "delta", "delta_w"),
    "corr": ("n_points", "value", "flags"),
    "halfplane": ("n_points", "value", "flags"),
    "blocks": ("p", "p_bar", "delta", "delta_bar", "coeff", "residual"),
    "blocks-compare": ("p", "p_bar", "delta", "delta_bar", "coeff", "residual", "closed_form"),
    "identities": ("name", "passed", "max_deviation", "tolerance", "samples"),
    "mc": ("estimator", "key", "estimate", "stderr", "n", "target", "z_score"),
    "mc-partials": ("estimator", "key", "batch", "soups", "mean"),
}


def schema_name(command: str) -> str:
    return f"loop-soup/{command}/v{SCHEMA_VERSION}"


def config_digest(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of the configuration."""
    canonical = json.dumps(run_config_to_dict(config), sort_keys=True, separators=(",", ":"), default=json_default)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def json_record(config: RunConfig, payload: dict) -> dict:
    """Wrap a command payload with schema, config echo and digest."""
    record = {
        "schema": schema_name(config.command),
        "config": run_config_to_dict(config),
        "config_digest": config_digest(config),
    }
    record.update(payload)
    return record


def write_json(record: dict, stream: TextIO) -> None:
    stream.write(json.dumps(record, indent=2, ensure_ascii=False, default=json_default))
    stream.write("\n")


def write_csv(table: str, rows: Iterable[Sequence], stream: TextIO, schema: Optional[str] = None) -> None:
    """
    Write a CSV table with its schema comment and fixed header.

    Args:
        table: Key of CSV_HEADERS
        rows: Data rows in header order
        stream: Output stream
        schema: Schema name; defaults to the one of table
    """
    stream.write(f"# schema: {schema or schema_name(table)}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADERS[table])
    for row in rows:
        writer.writerow([_csv_cell(value) for value in row])


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    if value is None:
        return ""
    return value


def open_output(path: Optional[str]) -> TextIO:
    """The output file, or stdout when path is None."""
    if path is None:
        return sys.stdout
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return open(target, "w", encoding="utf-8", newline="")
