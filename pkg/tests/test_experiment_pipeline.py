#!/usr/bin/env python
"""
Test module for the experiment pipeline.

This module contains tests for:
- Building problem instances from configs
- Executing runs and comparing ledgers with predictions
- Solver-constant overrides
- Run files and their determinism
- Sweeps and the scaling aggregate
"""

import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import MagicMock

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

try:
    from config import get_solver_config, reset_solver_config
    from qfw.experiment_pipeline import (
        ExperimentPipeline,
        aggregate_cells,
        build_problem,
        jordan_failure_probability,
        predict_run,
    )
    from qfw.domain import ErrorModel
    from qfw.fw_engine import Schedule
    from qfw.lmo_vector import max_find_budget, max_find_repetitions
    from qfw.utils.run_config import SweepConfig, build_run_config
    from qfw.utils.serialization import read_csv, read_json
except ImportError as e:
    raise ImportError(f"Failed to import qfw.experiment_pipeline. Original error: {e}")


def make_config(variant, epsilon, problem, **run):
    """RunConfig from plain strings, the way a config file would supply them."""
    run_section = {"variant": variant, "epsilon": str(epsilon)}
    run_section.update({key: str(value) for key, value in run.items()})
    return build_run_config({"run": run_section, "problem": {k: str(v) for k, v in problem.items()}})


SIMPLEX = {"kind": "simplex_quadratic", "d": 8}


class TestBuildProblem(unittest.TestCase):
    """Instances built from problem sections."""

    def test_every_kind(self):
        cases = [
            ("classical_fw", {"kind": "least_squares_l1", "d": 6}),
            ("classical_fw", SIMPLEX),
            ("qfw_group", {"kind": "group", "d": 6, "group_size": 3, "overlap": 1}),
            ("matrix_exact", {"kind": "matrix_completion", "d": 4, "rank": 2}),
            ("matrix_exact", {"kind": "planted_spectrum", "d": 3, "singular_values": "0.9, 0.3"}),
        ]
        for variant, problem in cases:
            with self.subTest(problem["kind"]):
                instance = build_problem(make_config(variant, 0.5, problem))
                self.assertEqual(instance.kind, problem["kind"])

    def test_group_defaults(self):
        instance = build_problem(make_config("qfw_group", 0.5, {"kind": "group", "d": 6, "group_size": 2}))
        self.assertEqual(instance.constraint_set.groups, ((0, 1), (2, 3), (4, 5)))
        self.assertEqual(instance.constraint_set.p_norms, (2.0, 2.0, 2.0))


class TestExecute(unittest.TestCase):
    """Single runs through the pipeline."""

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)
        reset_solver_config()

    def test_maxfind_run(self):
        callback = MagicMock()
        pipeline = ExperimentPipeline(callback_function=callback)
        config = make_config("qfw_maxfind", 0.5, SIMPLEX)
        trace, result = pipeline.execute(config)
        T = Schedule.for_problem(build_problem(config).objective, build_problem(config).constraint_set).iterations(0.5)
        self.assertEqual(result["iterations"], T)
        self.assertTrue(result["success"])
        self.assertTrue(result["slack_certified"])
        self.assertTrue(result["feasible"])
        self.assertEqual(result["comparison"]["counter"], "function_queries")
        expected = max_find_budget(8) * max_find_repetitions(0.05 / T) * 2
        self.assertAlmostEqual(result["comparison"]["measured"], expected)
        self.assertEqual(result["comparison"]["rounds"], T)
        self.assertTrue(callback.called)

    def test_jordan_failure_probability(self):
        config = make_config("qfw_jordan", 0.5, SIMPLEX)
        instance = build_problem(config)
        T = Schedule.for_problem(instance.objective, instance.constraint_set).iterations(0.5)
        self.assertAlmostEqual(jordan_failure_probability(instance, config), 0.05 / T)
        explicit = make_config("qfw_jordan", 0.5, SIMPLEX, rho=0.2)
        self.assertEqual(jordan_failure_probability(instance, explicit), 0.2)

    def test_jordan_run_charges_quantum_queries(self):
        _, result = ExperimentPipeline().execute(make_config("qfw_jordan", 0.5, SIMPLEX))
        self.assertEqual(result["comparison"]["counter"], "quantum_queries")
        self.assertAlmostEqual(result["comparison"]["measured"], 1.0)
        self.assertAlmostEqual(result["comparison"]["ratio"], 1.0)

    def test_group_predictions(self):
        problem = {"kind": "group", "d": 6, "group_size": 3}
        for variant, name in (("classical_group", "classical_group"), ("qfw_group", "qfw_group")):
            config = make_config(variant, 0.5, problem)
            prediction = predict_run(build_problem(config), config, ErrorModel())
            self.assertEqual(prediction.variant, name)
        config = make_config("classical_group", 0.5, problem)
        prediction = predict_run(build_problem(config), config, ErrorModel())
        self.assertEqual(prediction.per_round_cost, 6.0)

    def test_matrix_exact_has_no_prediction(self):
        config = make_config("matrix_exact", 0.2, {"kind": "planted_spectrum", "d": 3, "singular_values": "0.9, 0.3"})
        _, result = ExperimentPipeline().execute(config)
        self.assertIsNone(result["prediction"])
        self.assertIsNone(result["comparison"])
        self.assertTrue(result["success"])

    def test_qpm_prediction_uses_scaled_spectrum(self):
        config = make_config("matrix_qpm", 0.2, {"kind": "planted_spectrum", "d": 3, "singular_values": "0.9, 0.3"})
        prediction = predict_run(build_problem(config), config, ErrorModel(seed=0))
        self.assertEqual(prediction.variant, "qpm")
        self.assertAlmostEqual(prediction.inputs["sigma1"], get_solver_config()["qpm_scaled_sigma"])
        self.assertGreater(prediction.inputs["gamma_min"], 0.0)

    def test_solver_overrides_are_scoped_to_run(self):
        pipeline = ExperimentPipeline()
        sections = {
            "run": {"variant": "classical_fw", "epsilon": "0.5"},
            "problem": {"kind": "simplex_quadratic", "d": "4"},
            "solver": {"power_method_c0": "4"},
        }
        pipeline.execute(build_run_config(sections))
        self.assertEqual(get_solver_config()["power_method_c0"], 4.0)
        pipeline.execute(make_config("classical_fw", 0.5, {"kind": "simplex_quadratic", "d": 4}))
        self.assertEqual(get_solver_config()["power_method_c0"], 8.0)

    def test_run_files_are_deterministic(self):
        pipeline = ExperimentPipeline()
        config = make_config("qfw_maxfind", 0.5, {"kind": "least_squares_l1", "d": 10}, seed=3)
        first = os.path.join(self.tmp_dir, "a")
        second = os.path.join(self.tmp_dir, "b")
        pipeline.run(config, first)
        pipeline.run(config, second)
        for name in ("trace.csv", "summary.json", "manifest.json"):
            with open(os.path.join(first, name), "rb") as f, open(os.path.join(second, name), "rb") as g:
                self.assertEqual(f.read(), g.read(), name)
        manifest = read_json(os.path.join(first, "manifest.json"))
        self.assertEqual(manifest["seed"], 3)
        self.assertEqual(manifest["config"]["variant"], "qfw_maxfind")

    def test_seed_changes_instance(self):
        pipeline = ExperimentPipeline()
        problem = {"kind": "least_squares_l1", "d": 10}
        _, a = pipeline.execute(make_config("classical_fw", 0.5, problem, seed=1))
        _, b = pipeline.execute(make_config("classical_fw", 0.5, problem, seed=2))
        self.assertNotEqual(a["final_value"], b["final_value"])


class TestSweep(unittest.TestCase):
    """Grid execution and scaling aggregates."""

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)
        reset_solver_config()

    def test_sequential_sweep(self):
        sweep = SweepConfig(
            base={
                "run": {"variant": "qfw_maxfind", "epsilon": "0.5"},
                "problem": {"kind": "simplex_quadratic"},
            },
            grid={"problem.d": ["8", "32"], "run.seed": ["0", "1"]},
        )
        aggregate = ExperimentPipeline().sweep(sweep, self.tmp_dir, workers=1)
        self.assertEqual(aggregate["cells"], 4)
        self.assertEqual(aggregate["success_rate"], 1.0)
        # per-round budget ratio between d = 32 and d = 8
        self.assertAlmostEqual(aggregate["slope_measured"], 0.4946, places=3)
        self.assertAlmostEqual(aggregate["slope_predicted"], 0.5)

        rows = read_csv(os.path.join(self.tmp_dir, "scaling.csv"))
        self.assertEqual([row["d"] for row in rows], ["8", "32"])
        self.assertEqual([row["cells"] for row in rows], ["2", "2"])
        self.assertTrue(os.path.isfile(os.path.join(self.tmp_dir, "aggregate.json")))
        manifest = read_json(os.path.join(self.tmp_dir, "cell_003", "manifest.json"))
        self.assertEqual(manifest["sweep_cell"], {"index": 3, "grid": {"problem.d": "32", "run.seed": "1"}})

    def test_aggregate_single_dimension_has_no_slope(self):
        def cell(index, measured, success):
            comparison = {"measured": measured, "predicted": 10.0, "ratio": measured / 10.0}
            return {"index": index, "labels": {}, "result": {"dimension": 16, "success": success, "comparison": comparison}}

        aggregate = aggregate_cells([cell(0, 10.0, True), cell(1, 30.0, False)])
        self.assertIsNone(aggregate["slope_measured"])
        self.assertEqual(aggregate["success_rate"], 0.5)
        self.assertEqual(len(aggregate["rows"]), 1)
        self.assertAlmostEqual(aggregate["rows"][0]["mean_per_round_measured"], 20.0)
        self.assertAlmostEqual(aggregate["rows"][0]["mean_ratio"], 2.0)


if __name__ == "__main__":
    unittest.main()
