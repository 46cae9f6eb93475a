#!/usr/bin/env python
"""
Run and sweep configuration files.

A run file is an INI document with a [run] section, a [problem] section and an
optional [solver] section of solver-constant overrides. Sweep files add a [grid]
section whose keys name another section's key ("problem.d = 64, 256, 1024") and
whose values are the comma-separated grid points. Every key is validated before
anything runs; unknown sections and keys raise ConfigError.
"""

import configparser
import itertools
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import config
from config import get_solver_config, solver_constant_names
from qfw.domain import ErrorMode
from qfw.errors import ConfigError

logger = logging.getLogger("run_config")

Sections = Dict[str, Dict[str, str]]

# Problem kinds each variant accepts
VARIANT_KINDS: Dict[str, Tuple[str, ...]] = {
    "classical_fw": ("least_squares_l1", "simplex_quadratic"),
    "qfw_maxfind": ("least_squares_l1", "simplex_quadratic"),
    "qfw_jordan": ("least_squares_l1", "simplex_quadratic"),
    "classical_group": ("group",),
    "qfw_group": ("group",),
    "matrix_exact": ("matrix_completion", "planted_spectrum"),
    "matrix_power": ("matrix_completion", "planted_spectrum"),
    "matrix_qtsve": ("matrix_completion", "planted_spectrum"),
    "matrix_qpm": ("matrix_completion", "planted_spectrum"),
}


def _int_groups(text: str) -> List[List[int]]:
    groups = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            groups.append([int(i) for i in chunk.split(",")])
    if not groups:
        raise ValueError("no groups given")
    return groups


def _float_list(text: str) -> List[float]:
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ValueError("empty list")
    return values


# key -> (parser, default); a default of None marks the key optional
_PROBLEM_KEYS: Dict[str, Dict[str, Tuple[Callable[[str], Any], Any]]] = {
    "least_squares_l1": {
        "d": (int, None),
        "n_rows": (int, None),
        "sparsity": (int, None),
        "noise": (float, 0.0),
        "radius": (float, 1.0),
    },
    "simplex_quadratic": {"d": (int, None)},
    "group": {
        "groups": (_int_groups, None),
        "p_norms": (_float_list, None),
        "d": (int, None),
        "group_size": (int, None),
        "overlap": (int, 0),
        "p": (float, 2.0),
        "radius": (float, 1.0),
    },
    "matrix_completion": {
        "d": (int, None),
        "rank": (int, 1),
        "obs_fraction": (float, 1.0),
        "radius": (float, 1.0),
    },
    "planted_spectrum": {
        "d": (int, None),
        "singular_values": (_float_list, None),
        "radius": (float, 1.0),
    },
}

_RUN_KEYS: Dict[str, Callable[[str], Any]] = {
    "variant": str,
    "epsilon": float,
    "p_fail": float,
    "seed": int,
    "error_mode": str,
    "rho": float,
    "repetitions": int,
    "output_dir": str,
}

_SECTIONS = ("run", "problem", "solver", "grid")


@dataclass(frozen=True)
class RunConfig:
    """One validated run: variant, problem spec, accuracy and randomness settings."""

    variant: str
    epsilon: float
    problem: Dict[str, Any]
    p_fail: float = 0.05
    seed: int = 0
    error_mode: str = ErrorMode.CONSISTENT.value
    rho: Optional[float] = None
    repetitions: int = 1
    output_dir: Optional[str] = None
    solver: Dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.problem["kind"]

    def with_seed(self, seed: int) -> "RunConfig":
        if seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {seed}")
        return replace(self, seed=int(seed))

    def as_dict(self) -> Dict[str, Any]:
        """Echo used in manifest.json (output_dir is omitted, it does not change results)."""
        echo = asdict(self)
        echo.pop("output_dir")
        return echo


@dataclass(frozen=True)
class SweepConfig:
    """A base run plus a grid of overrides, expanded as a cross product."""

    base: Sections
    grid: Dict[str, List[str]]

    def with_seed(self, seed: int) -> "SweepConfig":
        """Override the base seed; a run.seed grid key still takes precedence per cell."""
        if seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {seed}")
        base = {name: dict(entries) for name, entries in self.base.items()}
        base.setdefault("run", {})["seed"] = str(int(seed))
        return SweepConfig(base=base, grid=self.grid)

    def cells(self) -> List[Tuple[Dict[str, str], RunConfig]]:
        """
        Expand the grid in file order, last key varying fastest.

        Returns:
            List of (cell labels, validated RunConfig).
        """
        keys = list(self.grid)
        cells = []
        for values in itertools.product(*(self.grid[k] for k in keys)):
            sections = {name: dict(entries) for name, entries in self.base.items()}
            labels = {}
            for key, value in zip(keys, values):
                section, option = key.split(".", 1)
                sections.setdefault(section, {})[option] = value
                labels[key] = value
            cells.append((labels, build_run_config(sections)))
        return cells


def read_sections(path: str) -> Sections:
    """
    Parse an INI file into plain nested dictionaries.

    Raises:
        ConfigError: If the file is missing or not valid INI.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"could not parse {path}: {e}") from e
    return parse_sections(parser)


def parse_sections(parser: configparser.ConfigParser) -> Sections:
    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    unknown = sorted(set(sections) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {unknown}")
    return sections


def _convert(section: str, key: str, raw: str, parse: Callable[[str], Any]) -> Any:
    try:
        return parse(raw.strip())
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {key} = {raw!r} is invalid: {e}") from e


def _parse_problem(entries: Dict[str, str]) -> Dict[str, Any]:
    entries = dict(entries)
    kind = entries.pop("kind", None)
    if kind not in _PROBLEM_KEYS:
        raise ConfigError(f"[problem] kind must be one of {sorted(_PROBLEM_KEYS)}, got {kind!r}")
    spec = _PROBLEM_KEYS[kind]
    unknown = sorted(set(entries) - set(spec))
    if unknown:
        raise ConfigError(f"[problem] unknown key(s) for {kind}: {unknown}")

    problem: Dict[str, Any] = {"kind": kind}
    for key, (parse, default) in spec.items():
        problem[key] = _convert("problem", key, entries[key], parse) if key in entries else default

    if kind == "group":
        if problem["groups"] is None:
            if problem["d"] is None or problem["group_size"] is None:
                raise ConfigError("[problem] group needs either groups or d and group_size")
        elif problem["p_norms"] is not None and len(problem["p_norms"]) != len(problem["groups"]):
            raise ConfigError("[problem] p_norms must have one entry per group")
    elif problem["d"] is None:
        raise ConfigError(f"[problem] {kind} needs d")
    elif problem["d"] < 1:
        raise ConfigError(f"[problem] d must be positive, got {problem['d']}")

    if kind == "least_squares_l1":
        if problem["n_rows"] is None:
            problem["n_rows"] = problem["d"]
        if problem["sparsity"] is None:
            problem["sparsity"] = min(3, problem["d"])
    if kind == "planted_spectrum" and problem["singular_values"] is None:
        raise ConfigError("[problem] planted_spectrum needs singular_values")
    return problem


def _parse_solver(entries: Dict[str, str]) -> Dict[str, Any]:
    known = solver_constant_names()
    unknown = sorted(set(entries) - set(known))
    if unknown:
        raise ConfigError(f"[solver] unknown constant(s): {unknown}")
    defaults = get_solver_config()
    return {key: _convert("solver", key, raw, type(defaults[key])) for key, raw in entries.items()}


def build_run_config(sections: Sections) -> RunConfig:
    """
    Validate parsed sections into a RunConfig.

    Raises:
        ConfigError: On unknown keys, missing required keys or out-of-range values.
    """
    run = dict(sections.get("run", {}))
    unknown = sorted(set(run) - set(_RUN_KEYS))
    if unknown:
        raise ConfigError(f"[run] unknown key(s): {unknown}")
    for required in ("variant", "epsilon"):
        if required not in run:
            raise ConfigError(f"[run] {required} is required")
    values = {key: _convert("run", key, raw, _RUN_KEYS[key]) for key, raw in run.items()}

    variant = values["variant"]
    if variant not in VARIANT_KINDS:
        raise ConfigError(f"[run] variant must be one of {sorted(VARIANT_KINDS)}, got {variant!r}")
    if not values["epsilon"] > 0 or not math.isfinite(values["epsilon"]):
        raise ConfigError(f"[run] epsilon must be positive, got {values['epsilon']}")
    if "p_fail" in values and not 0 < values["p_fail"] < 1:
        raise ConfigError(f"[run] p_fail must be in (0, 1), got {values['p_fail']}")
    if "rho" in values and not 0 < values["rho"] <= 1:
        raise ConfigError(f"[run] rho must be in (0, 1], got {values['rho']}")
    if values.get("repetitions", 1) < 1:
        raise ConfigError(f"[run] repetitions must be >= 1, got {values['repetitions']}")
    if values.get("seed", 0) < 0:
        raise ConfigError(f"[run] seed must be nonnegative, got {values['seed']}")
    modes = [mode.value for mode in ErrorMode]
    if values.get("error_mode", ErrorMode.CONSISTENT.value) not in modes:
        raise ConfigError(f"[run] error_mode must be one of {modes}, got {values['error_mode']!r}")

    if "problem" not in sections:
        raise ConfigError("[problem] section is required")
    problem = _parse_problem(sections["problem"])
    if problem["kind"] not in VARIANT_KINDS[variant]:
        raise ConfigError(f"variant {variant} cannot run on problem kind {problem['kind']}")

    return RunConfig(problem=problem, solver=_parse_solver(sections.get("solver", {})), **values)


def load_run_config(path: str) -> RunConfig:
    """Read and validate a run file; a [grid] section is rejected here."""
    sections = read_sections(path)
    if "grid" in sections:
        raise ConfigError("[grid] belongs in a sweep config; use the sweep command")
    run_config = build_run_config(sections)
    logger.info(f"Loaded run config {path}: {run_config.variant} on {run_config.kind}")
    return run_config


def load_sweep_config(path: str) -> SweepConfig:
    """
    Read a sweep file and validate every grid cell up front.

    Raises:
        ConfigError: On an empty or malformed grid, or any invalid cell.
    """
    sections = read_sections(path)
    raw_grid = sections.pop("grid", {})
    grid: Dict[str, List[str]] = {}
    for key, raw in raw_grid.items():
        section, _, option = key.partition(".")
        if section not in ("run", "problem", "solver") or not option:
            raise ConfigError(f"[grid] key must look like section.key, got {key!r}")
        points = [v.strip() for v in raw.split(",") if v.strip()]
        if not points:
            raise ConfigError(f"[grid] {key} has no values")
        grid[key] = points
    if not grid:
        raise ConfigError("[grid] is empty; a sweep needs at least one grid key")
    sweep = SweepConfig(base=sections, grid=grid)
    cells = sweep.cells()
    logger.info(f"Loaded sweep config {path}: {len(cells)} cell(s)")
    return sweep


def resolve_output_dir(cli_out: Optional[str], configured: Optional[str] = None) -> str:
    """Output directory precedence: --out, then OUTPUT_DIR, then [run] output_dir, then results/."""
    if cli_out:
        return cli_out
    if config.OUTPUT_DIR:
        return config.OUTPUT_DIR
    if configured:
        return configured
    return config.DEFAULT_OUTPUT_DIR
