#!/usr/bin/env python
"""
Utility modules for the quantum Frank-Wolfe emulation.

This package contains the run/sweep configuration parser and the writers of
the reproducible result files.
"""

from .run_config import RunConfig, SweepConfig, load_run_config, load_sweep_config
from .serialization import TRACE_COLUMNS, write_run_files

__all__ = [
    'RunConfig',
    'SweepConfig',
    'load_run_config',
    'load_sweep_config',
    'TRACE_COLUMNS',
    'write_run_files',
]
