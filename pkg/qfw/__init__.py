#!/usr/bin/env python
"""
Quantum Frank-Wolfe emulation

This package provides Frank-Wolfe solvers whose linear minimization oracles are
classical emulations of quantum subroutines, with charged query accounting and
closed-form cost predictions.
"""

import os
import sys
import logging
from typing import Callable, Optional

# Configure logging
logging.basicConfig(level=logging.INFO,
                   format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("qfw")

# Ensure the parent directory is in sys.path
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

# Export key classes
from .domain import ErrorMode, ErrorModel, QueryLedger, SmoothObjective
from .errors import ConfigError, DegenerateInputError, InvalidArgumentError, PreconditionError, QfwError
from .experiment_pipeline import ExperimentPipeline

# Define version
__version__ = "0.1.1"


def create_pipeline(callback_function: Optional[Callable[[str], None]] = None) -> ExperimentPipeline:
    """
    Create an experiment pipeline with every variant registered.

    Args:
        callback_function: Function to call with status updates.

    Returns:
        ExperimentPipeline: The pipeline.
    """
    return ExperimentPipeline(callback_function=callback_function)
