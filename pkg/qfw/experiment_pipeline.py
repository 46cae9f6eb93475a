#!/usr/bin/env python
"""
Experiment pipeline for the Frank-Wolfe solvers.

This module turns a validated RunConfig into a problem instance, runs the
configured variant, compares its ledger with the cost model and writes the run
files. Sweeps expand a grid into isolated cells executed in a worker pool and
aggregate per-round costs into scaling.csv with fitted log-log slopes.
"""

import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Tuple, TypedDict

import numpy as np

# Ensure the parent directory is in sys.path
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

from config import SYSTEM_INFO, get_solver_config, reset_solver_config, update_solver_config
from qfw.cost_model import (
    ComparisonReport,
    CostPrediction,
    compare,
    loglog_slope,
    predict_matrix,
    predict_vector,
)
from qfw.domain import ErrorMode, ErrorModel
from qfw.errors import InvalidArgumentError
from qfw.fw_engine import (
    RunTrace,
    Schedule,
    classical_fw_run,
    matrix_exact_run,
    matrix_power_run,
    qfw_group_run,
    qfw_jordan_run,
    qfw_matrix_qpm_run,
    qfw_matrix_qtsve_run,
    qfw_vector_run,
    sigma_upper_estimate,
)
from qfw.lmo_matrix import qpm_emulate
from qfw.problems import (
    ProblemInstance,
    make_group_instance,
    make_groups,
    make_least_squares_l1,
    make_matrix_completion,
    make_planted_spectrum,
    make_simplex_quadratic,
)
from qfw.utils.run_config import RunConfig, SweepConfig
from qfw.utils.serialization import clean_number, write_csv, write_json, write_run_files

logger = logging.getLogger("pipeline")

# (instance, config, error model) -> trace
VariantRunner = Callable[[ProblemInstance, RunConfig, ErrorModel], RunTrace]

# Cost-model name of each runnable variant; matrix_exact has no charged cost to predict
PREDICTION_NAMES: Dict[str, Optional[str]] = {
    "classical_fw": "classical_fw",
    "qfw_maxfind": "qfw_maxfind",
    "qfw_jordan": "qfw_jordan",
    "classical_group": "classical_group",
    "qfw_group": "qfw_group",
    "matrix_exact": None,
    "matrix_power": "power",
    "matrix_qtsve": "qtsve",
    "matrix_qpm": "qpm",
}

SCALING_COLUMNS = (
    "d",
    "cells",
    "success_rate",
    "mean_per_round_measured",
    "mean_per_round_predicted",
    "mean_ratio",
    "slope_measured",
    "slope_predicted",
)


class RunResult(TypedDict):
    """Summary of one run; written verbatim to summary.json."""

    variant: str
    problem: Dict[str, Any]
    seed: int
    dimension: int
    iterations: int
    final_value: float
    reference_optimum: float
    provenance: str
    primal_gap: float
    final_duality_gap: float
    tolerance: float
    success: bool
    slack_certified: bool
    feasible: bool
    ledger: Dict[str, Any]
    parameters: Dict[str, Any]
    prediction: Optional[Dict[str, Any]]
    comparison: Optional[ComparisonReport]


class SweepResult(TypedDict):
    """Aggregate of a sweep; written to aggregate.json."""

    cells: int
    success_rate: float
    slope_measured: Optional[float]
    slope_predicted: Optional[float]
    rows: List[Dict[str, Any]]


def build_problem(run_config: RunConfig) -> ProblemInstance:
    """Instantiate the configured problem, seeded with the run seed."""
    spec = run_config.problem
    seed = run_config.seed
    kind = spec["kind"]
    if kind == "least_squares_l1":
        return make_least_squares_l1(
            spec["d"], spec["n_rows"], spec["sparsity"], spec["noise"], seed, radius=spec["radius"]
        )
    if kind == "simplex_quadratic":
        return make_simplex_quadratic(spec["d"], seed)
    if kind == "group":
        groups = spec["groups"] or make_groups(spec["d"], spec["group_size"], spec["overlap"])
        p_norms = spec["p_norms"] or [spec["p"]] * len(groups)
        return make_group_instance(groups, p_norms, seed, radius=spec["radius"])
    if kind == "matrix_completion":
        return make_matrix_completion(spec["d"], spec["rank"], spec["obs_fraction"], seed, radius=spec["radius"])
    if kind == "planted_spectrum":
        return make_planted_spectrum(spec["d"], spec["singular_values"], seed, radius=spec["radius"])
    raise InvalidArgumentError(f"unknown problem kind '{kind}'")


# --- Variant runners ---


def _run_classical(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    return classical_fw_run(instance.objective, instance.constraint_set, run_config.epsilon)


def _run_maxfind(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    return qfw_vector_run(instance.objective, instance.constraint_set, run_config.epsilon, run_config.p_fail, model)


def jordan_failure_probability(instance: ProblemInstance, run_config: RunConfig) -> float:
    """Per-round failure probability rho; p_fail / T unless the config sets it."""
    if run_config.rho is not None:
        return run_config.rho
    T = Schedule.for_problem(instance.objective, instance.constraint_set).iterations(run_config.epsilon)
    return run_config.p_fail / T


def _run_jordan(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    rho = jordan_failure_probability(instance, run_config)
    return qfw_jordan_run(instance.objective, instance.constraint_set, run_config.epsilon, rho, model)


def _run_qfw_group(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    ball = instance.constraint_set
    return qfw_group_run(
        instance.objective, ball.groups, ball.p_norms, run_config.epsilon, run_config.p_fail, model,
        radius=ball.radius,
    )


def _run_matrix_exact(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    return matrix_exact_run(instance.gradient_callback, instance.objective, instance.constraint_set, run_config.epsilon)


def _run_matrix_power(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    return matrix_power_run(
        instance.gradient_callback, instance.objective, instance.constraint_set, run_config.epsilon, model
    )


def _run_matrix_qtsve(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    return qfw_matrix_qtsve_run(
        instance.gradient_callback, instance.objective, instance.constraint_set, run_config.epsilon, model,
        repetitions=run_config.repetitions,
    )


def _run_matrix_qpm(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> RunTrace:
    return qfw_matrix_qpm_run(
        instance.gradient_callback, instance.objective, instance.constraint_set, run_config.epsilon, model
    )


# --- Predictions ---


def _matrix_prediction_inputs(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> Dict[str, Any]:
    """Spectral inputs of the cost formulas, read off the gradient at the starting point."""
    ball = instance.constraint_set
    M = np.asarray(instance.gradient_callback(ball.initial_point()), dtype=np.float64)
    values = np.linalg.svd(M, compute_uv=False)
    params: Dict[str, Any] = {
        "d": max(ball.shape),
        "r": max(1, int(np.linalg.matrix_rank(M))),
        "sigma1": float(values[0]),
        "sigma2": float(values[1]) if values.size > 1 else 0.0,
        "epsilon": run_config.epsilon,
        "C_f": instance.objective.curvature,
    }
    if PREDICTION_NAMES[run_config.variant] == "qpm":
        schedule = Schedule.for_problem(instance.objective, ball)
        k = schedule.qpm_iterations(sigma_upper_estimate(M, model), run_config.epsilon)
        clean = qpm_emulate(M, k, 0.0, 0.0, ErrorModel(ErrorMode.EXACT, model.seed))
        params["sigma1"] = get_solver_config()["qpm_scaled_sigma"]
        params["gamma_min"] = clean.chain_floor
        params.pop("sigma2")
    return params


def predict_run(instance: ProblemInstance, run_config: RunConfig, model: ErrorModel) -> Optional[CostPrediction]:
    """Cost-model prediction matching the configured variant, or None for matrix_exact."""
    name = PREDICTION_NAMES[run_config.variant]
    if name is None:
        return None
    if instance.is_matrix:
        return predict_matrix(name, **_matrix_prediction_inputs(instance, run_config, model))

    constraint_set = instance.constraint_set
    accuracy = {"C_f": instance.objective.curvature, "p": run_config.p_fail, "epsilon": run_config.epsilon}
    params: Dict[str, Any] = {"d": constraint_set.dim}
    if name == "classical_group":
        params = {"group_sizes": [len(g) for g in constraint_set.groups]}
    elif name == "qfw_group":
        params = dict(
            accuracy,
            num_groups=len(constraint_set.groups),
            max_group_size=constraint_set.max_group_size,
        )
    elif name == "qfw_maxfind":
        params.update(accuracy)
    elif name == "qfw_jordan":
        params.update(
            G=instance.objective.lipschitz,
            rho=jordan_failure_probability(instance, run_config),
            epsilon=run_config.epsilon,
        )
    return predict_vector(name, **params)


class ExperimentPipeline:
    """
    Runs configured experiments and writes their result files.

    This pipeline:
    1. Applies the config's solver-constant overrides
    2. Builds the seeded problem instance
    3. Runs the registered variant and evaluates the final iterate
    4. Compares the measured ledger with the cost-model prediction
    """

    # Class variables for variant registration
    variants: Dict[str, VariantRunner] = {}

    @classmethod
    def register_variant(cls, name: str, runner: VariantRunner) -> None:
        """
        Register a runnable variant.

        Args:
            name: Variant name used in [run] variant.
            runner: Function building the trace from (instance, config, model).
        """
        cls.variants[name] = runner

    @classmethod
    def get_all_variants(cls) -> Dict[str, VariantRunner]:
        return cls.variants

    def __init__(self, callback_function: Optional[Callable[[str], None]] = None):
        """
        Initialize the experiment pipeline.

        Args:
            callback_function: Function to call with status updates.
        """
        self.callback_function = callback_function
        self.logger = logging.getLogger("pipeline")

    def execute(self, run_config: RunConfig) -> Tuple[RunTrace, RunResult]:
        """
        Run one configured experiment without writing anything.

        Returns:
            Tuple[RunTrace, RunResult]: The trace and its summary.
        """
        if run_config.variant not in self.variants:
            raise InvalidArgumentError(f"variant '{run_config.variant}' is not registered")
        reset_solver_config()
        if run_config.solver:
            update_solver_config(run_config.solver)

        self.logger.info(
            f"Running {run_config.variant} on {run_config.kind} "
            f"(epsilon={run_config.epsilon}, seed={run_config.seed}, mode={run_config.error_mode})"
        )
        self._notify(f"Building {run_config.kind} instance...")
        instance = build_problem(run_config)
        model = ErrorModel(mode=run_config.error_mode, seed=run_config.seed)

        self._notify(f"Running {run_config.variant}...")
        trace = self.variants[run_config.variant](instance, run_config, model)

        prediction = predict_run(instance, run_config, model)
        comparison = compare(trace.ledger, prediction) if prediction is not None else None
        if comparison is not None:
            self.logger.info(
                f"Per-round {comparison['counter']}: measured {comparison['measured']:.6g}, "
                f"predicted {comparison['predicted']:.6g} (ratio {comparison['ratio']:.3g})"
            )

        primal_gap = instance.primal_gap(trace.final_value)
        tolerance = instance.tolerance(run_config.epsilon)
        result: RunResult = {
            "variant": run_config.variant,
            "problem": dict(instance.params, kind=instance.kind),
            "seed": run_config.seed,
            "dimension": max(instance.constraint_set.shape),
            "iterations": trace.iterations,
            "final_value": trace.final_value,
            "reference_optimum": instance.reference_optimum,
            "provenance": instance.provenance,
            "primal_gap": primal_gap,
            "final_duality_gap": trace.final_gap,
            "tolerance": tolerance,
            "success": bool(primal_gap <= tolerance),
            "slack_certified": trace.slack_certified(),
            "feasible": trace.all_feasible(),
            "ledger": trace.ledger.as_dict(),
            "parameters": {k: clean_number(v) for k, v in trace.parameters.items()},
            "prediction": prediction.as_dict() if prediction is not None else None,
            "comparison": comparison,
        }
        self._log_result(result)
        return trace, result

    def run(self, run_config: RunConfig, run_dir: str, extra_manifest: Optional[Dict[str, Any]] = None) -> RunResult:
        """Execute one run and write trace.csv, summary.json and manifest.json into run_dir."""
        trace, result = self.execute(run_config)
        write_run_files(run_dir, trace, dict(result), run_config.as_dict(), extra_manifest)
        return result

    def sweep(self, sweep_config: SweepConfig, out_dir: str, workers: Optional[int] = None) -> SweepResult:
        """
        Run every grid cell into out_dir/cell_NNN and write scaling.csv and aggregate.json.

        Args:
            sweep_config: Validated sweep.
            out_dir: Sweep output directory.
            workers: Worker processes; 1 runs the cells in this process.
        """
        cells = sweep_config.cells()
        workers = workers or SYSTEM_INFO["cpu_count"]
        jobs = [
            (index, labels, run_config, os.path.join(out_dir, f"cell_{index:03d}"))
            for index, (labels, run_config) in enumerate(cells)
        ]
        self.logger.info(f"Sweeping {len(jobs)} cell(s) with {min(workers, len(jobs))} worker(s)")

        if workers <= 1 or len(jobs) == 1:
            results = []
            for job in jobs:
                self._notify(f"Cell {job[0] + 1}/{len(jobs)}: {job[1]}")
                results.append(_run_cell(job))
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                results = list(pool.map(_run_cell, jobs))

        aggregate = aggregate_cells(results)
        write_csv(os.path.join(out_dir, "scaling.csv"), SCALING_COLUMNS, aggregate["rows"])
        write_json(os.path.join(out_dir, "aggregate.json"), aggregate)
        self.logger.info(
            f"Sweep done: success rate {aggregate['success_rate']:.3f}, slope {aggregate['slope_measured']}"
        )
        return aggregate

    def _notify(self, message: str) -> None:
        """Send a notification via the callback function if provided."""
        if self.callback_function:
            try:
                self.callback_function(message)
            except Exception as e:
                self.logger.error(f"Error in notification callback: {e}")

    def _log_result(self, result: RunResult) -> None:
        self.logger.info(
            f"{result['variant']}: {result['iterations']} iterations, primal gap "
            f"{result['primal_gap']:.6g} (tolerance {result['tolerance']:.6g}), "
            f"success={result['success']}"
        )
        if not result["slack_certified"]:
            self.logger.warning(f"{result['variant']}: an LMO slack exceeded its per-round budget")
        if not result["feasible"]:
            self.logger.warning(f"{result['variant']}: an iterate left the constraint set")


def _run_cell(job: Tuple[int, Dict[str, str], RunConfig, str]) -> Dict[str, Any]:
    index, labels, run_config, cell_dir = job
    pipeline = ExperimentPipeline()
    try:
        result = pipeline.run(run_config, cell_dir, extra_manifest={"sweep_cell": {"index": index, "grid": labels}})
    except Exception:
        logger.error(f"Cell {index} failed:\n{traceback.format_exc()}")
        raise
    return {"index": index, "labels": labels, "result": result}


def _safe_slope(xs: List[float], ys: List[Optional[float]]) -> Optional[float]:
    points = [(x, y) for x, y in zip(xs, ys) if y is not None and y > 0]
    if len({x for x, _ in points}) < 2:
        return None
    try:
        return loglog_slope([x for x, _ in points], [y for _, y in points])
    except InvalidArgumentError:
        return None


def aggregate_cells(cells: List[Dict[str, Any]]) -> SweepResult:
    """
    Group cells by dimension and fit log-log slopes of per-round cost against d.

    Returns:
        SweepResult: One row per distinct d plus overall slopes and success rate.
    """
    by_dim: Dict[int, List[RunResult]] = {}
    for cell in sorted(cells, key=lambda c: c["index"]):
        result = cell["result"]
        by_dim.setdefault(result["dimension"], []).append(result)

    rows = []
    for d in sorted(by_dim):
        results = by_dim[d]
        comparisons = [r["comparison"] for r in results if r["comparison"] is not None]
        rows.append({
            "d": d,
            "cells": len(results),
            "success_rate": float(np.mean([r["success"] for r in results])),
            "mean_per_round_measured": float(np.mean([c["measured"] for c in comparisons])) if comparisons else None,
            "mean_per_round_predicted": float(np.mean([c["predicted"] for c in comparisons])) if comparisons else None,
            "mean_ratio": float(np.mean([c["ratio"] for c in comparisons])) if comparisons else None,
        })

    dims = [float(row["d"]) for row in rows]
    slope_measured = _safe_slope(dims, [row["mean_per_round_measured"] for row in rows])
    slope_predicted = _safe_slope(dims, [row["mean_per_round_predicted"] for row in rows])
    for row in rows:
        row["slope_measured"] = slope_measured
        row["slope_predicted"] = slope_predicted

    successes = [cell["result"]["success"] for cell in cells]
    return SweepResult(
        cells=len(cells),
        success_rate=float(np.mean(successes)) if successes else 0.0,
        slope_measured=slope_measured,
        slope_predicted=slope_predicted,
        rows=rows,
    )


ExperimentPipeline.register_variant("classical_fw", _run_classical)
ExperimentPipeline.register_variant("qfw_maxfind", _run_maxfind)
ExperimentPipeline.register_variant("qfw_jordan", _run_jordan)
ExperimentPipeline.register_variant("classical_group", _run_classical)
ExperimentPipeline.register_variant("qfw_group", _run_qfw_group)
ExperimentPipeline.register_variant("matrix_exact", _run_matrix_exact)
ExperimentPipeline.register_variant("matrix_power", _run_matrix_power)
ExperimentPipeline.register_variant("matrix_qtsve", _run_matrix_qtsve)
ExperimentPipeline.register_variant("matrix_qpm", _run_matrix_qpm)
