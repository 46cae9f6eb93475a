#!/usr/bin/env python
"""
Core application functionality for the quantum Frank-Wolfe emulation.

This module provides the subcommand logic used by the launcher: a single
configured run, a parameter sweep, and the invariant verification suite.
"""

import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

# Configure logging
logger = logging.getLogger("qfw_app")


def run_experiment(
    config_path: str,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    quiet: bool = False,
) -> Dict[str, Any]:
    """
    Execute one configured run and write its result files.

    Args:
        config_path: Path of the run config file.
        seed: Optional seed overriding [run] seed.
        out: Optional output directory (highest precedence).
        quiet: Whether to minimize output.

    Returns:
        Dict[str, Any]: The run summary (also written to summary.json).
    """
    from qfw.experiment_pipeline import ExperimentPipeline
    from qfw.utils.run_config import load_run_config, resolve_output_dir

    run_config = load_run_config(config_path)
    if seed is not None:
        run_config = run_config.with_seed(seed)
    run_dir = resolve_output_dir(out, run_config.output_dir)

    pipeline = ExperimentPipeline(callback_function=None if quiet else logger.info)
    result = pipeline.run(run_config, run_dir)

    if not quiet:
        display_run_result(result, run_dir)
    return dict(result)


def run_sweep(
    config_path: str,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    workers: Optional[int] = None,
    quiet: bool = False,
) -> Dict[str, Any]:
    """
    Execute every cell of a sweep and write scaling.csv next to the cell directories.

    Args:
        config_path: Path of the sweep config file.
        seed: Optional seed overriding the base [run] seed.
        out: Optional output directory (highest precedence).
        workers: Worker processes; defaults to the logical CPU count.
        quiet: Whether to minimize output.

    Returns:
        Dict[str, Any]: The sweep aggregate.
    """
    from qfw.experiment_pipeline import ExperimentPipeline
    from qfw.utils.run_config import load_sweep_config, resolve_output_dir

    sweep = load_sweep_config(config_path)
    if seed is not None:
        sweep = sweep.with_seed(seed)
    out_dir = resolve_output_dir(out, sweep.base.get("run", {}).get("output_dir"))

    pipeline = ExperimentPipeline(callback_function=None if quiet else logger.info)
    aggregate = pipeline.sweep(sweep, out_dir, workers=workers)

    if not quiet:
        display_sweep_result(aggregate, out_dir)
    return dict(aggregate)


def run_verify(
    filters: Optional[Sequence[str]] = None,
    seed: int = 0,
    quiet: bool = False,
) -> Tuple[bool, List[Dict[str, Any]]]:
    """
    Run the invariant suite and print the status table.

    Args:
        filters: Suite names or invariant-name prefixes; everything when empty.
        seed: Base seed of the randomized checks.
        quiet: Print only violations.

    Returns:
        Tuple[bool, List]: Whether every invariant holds, and the result rows.
    """
    from qfw.invariant_checker import InvariantChecker

    checker = InvariantChecker(seed=seed)
    results = checker.run(filters)
    ok = all(r["passed"] for r in results)
    if not quiet or not ok:
        print(checker.summarize(results))
    return ok, [dict(r) for r in results]


def display_run_result(result: Dict[str, Any], run_dir: str) -> None:
    """
    Display the outcome of one run.

    Args:
        result: The run summary.
        run_dir: Where the files were written.
    """
    print("\n" + "=" * 80)
    print("FRANK-WOLFE RUN RESULTS")
    print("=" * 80)

    print(f"\nVariant: {result['variant']} on {result['problem'].get('kind')}")
    print(f"Iterations: {result['iterations']}")
    print(f"Final value: {result['final_value']:.10g} (reference {result['reference_optimum']:.10g}, "
          f"{result['provenance']})")
    print(f"Primal gap: {result['primal_gap']:.6g} (tolerance {result['tolerance']:.6g})")
    print(f"Duality gap: {result['final_duality_gap']:.6g}")
    print(f"Success: {'Yes' if result['success'] else 'No'}")

    ledger = result["ledger"]
    print("\nLEDGER TOTALS:")
    for counter in ("function_queries", "quantum_queries", "matvecs", "gradient_evaluations", "time_cost"):
        print(f"  - {counter}: {ledger[counter]:.6g}")

    comparison = result.get("comparison")
    if comparison:
        print(f"\nPer-round {comparison['counter']}: measured {comparison['measured']:.6g}, "
              f"predicted {comparison['predicted']:.6g}, ratio {comparison['ratio']:.4g}")

    print(f"\nFiles written to {os.path.abspath(run_dir)}")


def display_sweep_result(aggregate: Dict[str, Any], out_dir: str) -> None:
    """Display the aggregate of a sweep."""
    print("\n" + "=" * 80)
    print("SWEEP RESULTS")
    print("=" * 80)
    print(f"\nCells: {aggregate['cells']}")
    print(f"Success rate: {aggregate['success_rate']:.3f}")
    for key in ("slope_measured", "slope_predicted"):
        value = aggregate[key]
        print(f"{key}: {'n/a' if value is None else f'{value:.4f}'}")
    print(f"\nscaling.csv written to {os.path.abspath(out_dir)}")
