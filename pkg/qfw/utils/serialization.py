#!/usr/bin/env python
"""
Result files written by runs and sweeps.

trace.csv, summary.json, manifest.json and scaling.csv are reproducible byte
for byte from (config, seed, artifact version): floats are written with 17
significant digits, JSON keys are sorted, and nothing time- or host-dependent
is recorded.
"""

import csv
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from config import ARTIFACT_VERSION, SCHEMA_VERSION

logger = logging.getLogger("serialization")

TRACE_COLUMNS = (
    "t",
    "gamma",
    "f_value",
    "duality_gap",
    "h_bound",
    "cum_function_queries",
    "cum_quantum_queries",
    "cum_time_cost",
)


def format_float(value: Any) -> str:
    """17 significant digits for floats, plain digits for integers."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return format(float(value), ".17g")


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_to_builtin) + "\n"


def write_json(path: str, data: Any) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(data))
    return path


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    """Write rows (dicts keyed by column) with formatted numbers and LF line endings."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_float(row.get(column)) for column in columns])
    return path


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def write_trace_csv(path: str, trace: Any) -> str:
    """One row per recorded iterate t = 1..T."""
    rows = (
        {
            "t": record.t,
            "gamma": record.gamma,
            "f_value": record.f_value,
            "duality_gap": record.duality_gap,
            "h_bound": record.h_bound,
            "cum_function_queries": record.cum_function_queries,
            "cum_quantum_queries": record.cum_quantum_queries,
            "cum_time_cost": record.cum_time_cost,
        }
        for record in trace.records
    )
    return write_csv(path, TRACE_COLUMNS, rows)


def build_manifest(config_echo: Dict[str, Any], files: Sequence[str], extra: Dict[str, Any] = None) -> Dict[str, Any]:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": ARTIFACT_VERSION,
        "seed": config_echo.get("seed"),
        "config": config_echo,
        "files": sorted(files),
        "trace_columns": list(TRACE_COLUMNS),
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_run_files(
    run_dir: str,
    trace: Any,
    summary: Dict[str, Any],
    config_echo: Dict[str, Any],
    extra_manifest: Dict[str, Any] = None,
) -> Dict[str, str]:
    """
    Write trace.csv, summary.json and manifest.json into run_dir.

    Returns:
        Dict[str, str]: File name to written path.
    """
    os.makedirs(run_dir, exist_ok=True)
    paths = {
        "trace.csv": write_trace_csv(os.path.join(run_dir, "trace.csv"), trace),
        "summary.json": write_json(os.path.join(run_dir, "summary.json"), summary),
    }
    manifest = build_manifest(config_echo, list(paths) + ["manifest.json"], extra_manifest)
    paths["manifest.json"] = write_json(os.path.join(run_dir, "manifest.json"), manifest)
    logger.info(f"Wrote run files to {run_dir}")
    return paths


def clean_number(value: Any) -> Any:
    """NaN and infinities become None so summaries stay strict JSON."""
    if isinstance(value, (float, np.floating)) and not math.isfinite(float(value)):
        return None
    return value
