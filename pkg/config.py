#!/usr/bin/env python
"""
Configuration settings for the quantum Frank-Wolfe emulation project.
This file centralizes the artifact constants and provides defaults.
"""

import os
import sys
import platform
import psutil
from dotenv import load_dotenv
from typing import Dict, Any

# Load environment variables from .env file
load_dotenv()

# Python version check
REQUIRED_PYTHON_VERSION = (3, 10)
current_version = sys.version_info[:2]
if current_version < REQUIRED_PYTHON_VERSION:
    print(f"Error: Python {REQUIRED_PYTHON_VERSION[0]}.{REQUIRED_PYTHON_VERSION[1]}+ is required.")
    print(f"Current version: {sys.version}")
    sys.exit(1)

# Paths
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# OUTPUT_DIR is the only setting read from the environment; everything else
# that changes a run lives in the run's config file.
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "")
DEFAULT_OUTPUT_DIR = os.path.join(BASE_DIR, "results")

# Versions embedded in every manifest
ARTIFACT_VERSION = "0.1.0"
SCHEMA_VERSION = "qfw-run/1"

# --- Solver constants ---
# Typed defaults; a run config may override them through its [solver] section.
_SOLVER_DEFAULTS: Dict[str, Any] = {
    "power_method_c0": 8.0,             # power-method iteration constant C0
    "polylog_exponent": 3.0,            # polylog(d) pinned to ln(d)**exponent
    "membership_tol": 1e-9,             # absolute tolerance on the defining norm
    "qpm_scaled_sigma": 0.9,            # sigma_1 after the QPM rescaling
    "jordan_outlier_factor": 10.0,      # outlier magnitude on a Jordan failure, in units of B
    "chain_collapse_tol": 1e-12,        # smallest admissible ||Mz|| in a matvec chain
    "cost_floor": 1e-12,                # precision floor inside charged-cost formulas
    "gap_tol": 1e-10,                   # relative spectral-gap tolerance
    "coarse_relative_precision": 0.25,  # sigma_1 pre-pass precision, relative to ||M||_F
    "reference_run_factor": 10,         # long reference runs use factor * T iterations
}

SOLVER_CONFIG: Dict[str, Any] = dict(_SOLVER_DEFAULTS)

# System information
SYSTEM_INFO = {
    "os": platform.system(),
    "python_version": platform.python_version(),
    "platform": platform.platform(),
    "cpu_count": psutil.cpu_count(logical=True) or 1,
    "physical_cpu_count": psutil.cpu_count(logical=False) or 1,
    "total_memory_gb": round(psutil.virtual_memory().total / 1024**3, 1),
}


def get_solver_config() -> Dict[str, Any]:
    """
    Get the current solver configuration.

    Returns:
        Dict[str, Any]: A copy of the active solver constants.
    """
    return SOLVER_CONFIG.copy()


def update_solver_config(config: Dict[str, Any]) -> None:
    """
    Update solver constants in place.

    Values are converted to the type of the corresponding default; unknown keys
    and values that cannot be converted are ignored with a warning.

    Args:
        config: Mapping of constant names to new values.
    """
    for key, value in config.items():
        if key not in _SOLVER_DEFAULTS:
            print(f"Warning: Solver constant '{key}' not recognized. Ignoring.", file=sys.stderr)
            continue
        expected_type = type(_SOLVER_DEFAULTS[key])
        try:
            SOLVER_CONFIG[key] = expected_type(value)
        except (ValueError, TypeError) as e:
            print(f"Warning: Could not update solver constant '{key}' with value '{value}'. Error: {e}", file=sys.stderr)


def reset_solver_config() -> None:
    """Restore every solver constant to its default."""
    SOLVER_CONFIG.clear()
    SOLVER_CONFIG.update(_SOLVER_DEFAULTS)


def solver_constant_names() -> list:
    """Names accepted by update_solver_config (used to validate [solver] sections)."""
    return sorted(_SOLVER_DEFAULTS)
