#!/usr/bin/env python
"""
Test module for the Frank-Wolfe engine.

This module contains tests for:
- The step-size and parameter schedule
- The generic loop: indexing, certificates and ledger attribution
- The vector variants (classical, maximum finding, one-query gradient, groups)
- The nuclear-norm variants on planted-spectrum and completion instances
"""

import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

try:
    from qfw.domain import ErrorModel, L1Ball, LatentGroupBall, SmoothObjective
    from qfw.errors import DegenerateInputError, InvalidArgumentError
    from qfw.fw_engine import (
        Schedule,
        classical_fw_run,
        duality_gap,
        exact_fw_run,
        fw_run,
        matrix_exact_run,
        matrix_power_run,
        qfw_group_run,
        qfw_jordan_run,
        qfw_matrix_qpm_run,
        qfw_matrix_qtsve_run,
        qfw_vector_run,
        sigma_upper_estimate,
    )
    from qfw.lmo_matrix import qtsve_cost
    from qfw.lmo_vector import exact_lmo_l1, max_find_budget, max_find_repetitions
    from qfw.problems import (
        make_least_squares_l1,
        make_matrix_completion,
        make_planted_spectrum,
        make_simplex_quadratic,
    )
except ImportError as e:
    raise ImportError(f"Failed to import qfw.fw_engine. Original error: {e}")


class TestSchedule(unittest.TestCase):
    """Closed-form per-iteration parameters."""

    def setUp(self):
        self.schedule = Schedule(curvature=4.0, smoothness=2.0, dim=9, radius=0.5)

    def test_gamma_and_bounds(self):
        self.assertEqual(Schedule.gamma(0), 1.0)
        self.assertAlmostEqual(Schedule.gamma(3), 0.4)
        self.assertAlmostEqual(self.schedule.h_bound(2), 4.0)

    def test_iterations(self):
        self.assertEqual(self.schedule.iterations(0.5), 30)
        self.assertEqual(self.schedule.iterations(100.0), 1)
        with self.assertRaises(InvalidArgumentError):
            self.schedule.iterations(0.0)

    def test_fd_step_matches_curvature(self):
        for t in (0, 5, 40):
            sigma = self.schedule.fd_step(t)
            self.assertAlmostEqual(sigma * 3.0 * 2.0 * (t + 2) * 0.5, 4.0)
        affine = Schedule(curvature=0.0, smoothness=0.0, dim=3)
        self.assertEqual(affine.fd_step(0), 1.0)

    def test_precision_clamps(self):
        self.assertEqual(self.schedule.qtsve_delta(0, 1e-3), 0.5)
        self.assertAlmostEqual(self.schedule.qtsve_delta(8, 2.0), 4.0 / (2 * 10 * 2.0 * 0.5))
        self.assertEqual(self.schedule.qpm_precision(10.0, 1.0, 0.1), 0.5)
        affine = Schedule(curvature=0.0, smoothness=0.0, dim=3)
        self.assertAlmostEqual(affine.power_precision(0), 0.5)


class TestGenericLoop(unittest.TestCase):
    """fw_run with the exact LMO."""

    def setUp(self):
        self.instance = make_least_squares_l1(d=20, n_rows=20, sparsity=3, noise=0.0, seed=1)

    def test_exact_run_meets_bound(self):
        trace = exact_fw_run(self.instance.objective, self.instance.constraint_set, 200)
        self.assertEqual(trace.iterations, 200)
        self.assertEqual([r.t for r in trace.records[:3]], [1, 2, 3])
        gaps = trace.primal_gaps(self.instance.reference_optimum)
        self.assertTrue(np.all(gaps <= trace.h_bounds() + 1e-12))
        self.assertEqual(trace.ledger.totals().gradient_evaluations, 200)
        self.assertTrue(self.instance.constraint_set.contains(trace.final_iterate))

    def test_duality_gap_dominates_primal_gap(self):
        trace = exact_fw_run(self.instance.objective, self.instance.constraint_set, 50)
        for record in trace.records:
            self.assertGreaterEqual(record.duality_gap + 1e-12, record.f_value - self.instance.reference_optimum)
            self.assertLessEqual(record.best_gap, record.duality_gap)

    def test_duality_gap_formula(self):
        ball = L1Ball(2)
        self.assertAlmostEqual(duality_gap([0.5, 0.0], [1.0, -2.0], ball), 0.5 + 2.0)

    def test_rejects_infeasible_start(self):
        objective = self.instance.objective
        ball = self.instance.constraint_set

        def lmo(x, t, gamma):
            return exact_lmo_l1(objective.gradient(x))

        schedule = Schedule.for_problem(objective, ball)
        with self.assertRaises(InvalidArgumentError):
            fw_run(objective, ball, lmo, schedule, np.full(20, 1.0), 5)
        with self.assertRaises(InvalidArgumentError):
            fw_run(objective, ball, lmo, schedule, ball.initial_point(), 0)

    def test_feasibility_flag_follows_atoms(self):
        objective = self.instance.objective
        ball = self.instance.constraint_set
        schedule = Schedule.for_problem(objective, ball)

        def escaping_lmo(x, t, gamma):
            result = exact_lmo_l1(objective.gradient(x))
            return replace(result, s=3.0 * result.s) if t == 2 else result

        trace = fw_run(objective, ball, escaping_lmo, schedule, ball.initial_point(), 6)
        self.assertEqual([r.feasible for r in trace.records], [True, True, False, False, False, False])
        self.assertFalse(trace.all_feasible())
        exact = exact_fw_run(objective, ball, 6)
        self.assertTrue(exact.all_feasible())

    def test_long_run_on_matrix_completion(self):
        instance = make_matrix_completion(d=4, rank=1, obs_fraction=1.0, seed=2)
        trace = exact_fw_run(
            instance.objective, instance.constraint_set, 2000, gradient_fn=instance.gradient_callback
        )
        gaps = trace.primal_gaps(instance.reference_optimum)
        self.assertTrue(np.all(gaps <= trace.h_bounds() + 1e-12))
        self.assertLess(trace.final_value, 2.0 * instance.objective.curvature / 2002)


class TestVectorVariants(unittest.TestCase):
    """Solver wirings over the l1 ball, the simplex and group balls."""

    def setUp(self):
        self.instance = make_least_squares_l1(d=16, n_rows=16, sparsity=2, noise=0.0, seed=3)
        self.objective = self.instance.objective
        self.ball = self.instance.constraint_set

    def test_classical_run_charges_d_plus_one(self):
        eps = self.objective.curvature / 5.0
        trace = classical_fw_run(self.objective, self.ball, eps)
        T = trace.parameters["T"]
        np.testing.assert_array_equal(trace.per_round("function_queries"), np.full(T, 17))
        self.assertTrue(trace.slack_certified())
        self.assertLessEqual(trace.records[-1].f_value - self.instance.reference_optimum, eps)

    def test_maxfind_run_charges_budget(self):
        eps = self.objective.curvature / 5.0
        trace = qfw_vector_run(self.objective, self.ball, eps, 0.05, ErrorModel(seed=1))
        T = trace.parameters["T"]
        per_round = max_find_budget(16) * max_find_repetitions(0.05 / T) * 2
        np.testing.assert_array_equal(trace.per_round("function_queries"), np.full(T, per_round))
        self.assertEqual(trace.records[-1].cum_function_queries, T * per_round)
        self.assertTrue(trace.slack_certified())
        self.assertLessEqual(trace.records[-1].f_value - self.instance.reference_optimum, trace.h_bounds()[-1])

    def test_maxfind_on_simplex(self):
        instance = make_simplex_quadratic(8, seed=4)
        trace = qfw_vector_run(instance.objective, instance.constraint_set, 0.1, 0.05, ErrorModel("worst_case"))
        self.assertTrue(np.all(trace.primal_gaps(instance.reference_optimum) <= trace.h_bounds() + 1e-9))

    def test_maxfind_rejects_group_ball(self):
        ball = LatentGroupBall(groups=[[0, 1]], p_norms=[2.0])
        objective = SmoothObjective(value_fn=lambda x: 0.0, smoothness=1.0, diameter=2.0)
        with self.assertRaises(InvalidArgumentError):
            qfw_vector_run(objective, ball, 0.1, 0.05, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            qfw_vector_run(self.objective, self.ball, 0.1, 1.0, ErrorModel())

    def test_jordan_run_uses_one_query_per_round(self):
        trace = qfw_jordan_run(self.objective, self.ball, self.objective.curvature / 5.0, 0.01, ErrorModel(seed=2))
        T = trace.parameters["T"]
        np.testing.assert_array_equal(trace.per_round("quantum_queries"), np.ones(T))
        self.assertEqual(trace.ledger.totals().function_queries, 0)
        self.assertTrue(trace.slack_certified())

    def test_jordan_run_rejects_bad_rho(self):
        with self.assertRaises(InvalidArgumentError):
            qfw_jordan_run(self.objective, self.ball, 0.1, 0.0, ErrorModel())

    def test_singleton_groups_reproduce_l1_run(self):
        model = ErrorModel("consistent", seed=5)
        eps = self.objective.curvature / 4.0
        plain = qfw_vector_run(self.objective, self.ball, eps, 0.05, model)
        grouped = qfw_group_run(self.objective, [[i] for i in range(16)], [2.0] * 16, eps, 0.05, model)
        self.assertEqual(plain.iterations, grouped.iterations)
        for a, b in zip(plain.records, grouped.records):
            self.assertAlmostEqual(a.f_value, b.f_value, places=12)
            self.assertEqual(a.cum_function_queries, b.cum_function_queries)
        np.testing.assert_allclose(plain.final_iterate, grouped.final_iterate, atol=1e-12)

    def test_classical_group_variant_name(self):
        ball = LatentGroupBall(groups=[[0, 1], [2, 3]], p_norms=[2.0, 2.0])
        objective = SmoothObjective(
            value_fn=lambda x: 0.5 * float(np.sum((x - 0.1) ** 2)),
            gradient_fn=lambda x: x - 0.1,
            smoothness=1.0,
            diameter=ball.diameter(),
        )
        trace = classical_fw_run(objective, ball, 1.0)
        self.assertEqual(trace.variant, "classical_group")
        np.testing.assert_array_equal(trace.per_round("function_queries"), np.full(trace.iterations, 5))


class TestMatrixVariants(unittest.TestCase):
    """Nuclear-norm Frank-Wolfe with exact and emulated singular pairs."""

    def setUp(self):
        self.instance = make_planted_spectrum(3, [0.9, 0.3], seed=6, radius=0.5)
        self.args = (self.instance.gradient_callback, self.instance.objective, self.instance.constraint_set)

    def test_planted_reference(self):
        self.assertAlmostEqual(self.instance.reference_optimum, 0.125)

    def test_exact_run(self):
        trace = matrix_exact_run(*self.args, 0.1)
        self.assertEqual(trace.parameters["T"], 38)
        self.assertLessEqual(self.instance.primal_gap(trace.final_value), 0.1)
        self.assertEqual(trace.ledger.totals().gradient_evaluations, 38)

    def test_power_run(self):
        trace = matrix_power_run(*self.args, 0.1, ErrorModel(seed=1))
        self.assertTrue(trace.slack_certified())
        self.assertLessEqual(self.instance.primal_gap(trace.final_value), 0.1)
        self.assertGreater(trace.ledger.totals().matvecs, 0)

    def test_qtsve_run(self):
        trace = qfw_matrix_qtsve_run(*self.args, 0.1, ErrorModel("consistent", seed=2))
        self.assertTrue(trace.slack_certified())
        self.assertLessEqual(self.instance.primal_gap(trace.final_value), 0.1)
        self.assertTrue(np.all(trace.per_round("time_cost") > 0))

    def test_qpm_run_exact_mode(self):
        trace = qfw_matrix_qpm_run(*self.args, 0.1, ErrorModel("exact"))
        self.assertLessEqual(self.instance.primal_gap(trace.final_value), 0.1)
        self.assertTrue(np.all(trace.per_round("matvecs") > 0))

    def test_vanishing_gap_is_degenerate(self):
        instance = make_planted_spectrum(3, [0.5, 0.5], seed=6, radius=0.5)
        with self.assertRaises(DegenerateInputError):
            qfw_matrix_qtsve_run(
                instance.gradient_callback, instance.objective, instance.constraint_set, 0.1, ErrorModel()
            )

    def test_qtsve_run_on_matrix_completion(self):
        for seed in range(3):
            with self.subTest(seed=seed):
                instance = make_matrix_completion(d=50, rank=3, obs_fraction=0.5, seed=seed)
                trace = qfw_matrix_qtsve_run(
                    instance.gradient_callback, instance.objective, instance.constraint_set, 0.1,
                    ErrorModel("consistent", seed=seed),
                )
                schedule = Schedule.for_problem(instance.objective, instance.constraint_set)
                self.assertEqual(trace.iterations, schedule.iterations(0.1))
                self.assertLessEqual(instance.primal_gap(trace.final_value), instance.tolerance(0.1))
                self.assertTrue(trace.slack_certified())
                self.assertTrue(trace.all_feasible())

    def test_qtsve_round_cost_matches_formula(self):
        instance = make_matrix_completion(d=50, rank=3, obs_fraction=0.5, seed=4)
        seen = []

        def recording_gradient(X):
            M = instance.gradient_callback(X)
            seen.append(M)
            return M

        model = ErrorModel("consistent", seed=1)
        trace = qfw_matrix_qtsve_run(recording_gradient, instance.objective, instance.constraint_set, 0.5, model)
        schedule = Schedule.for_problem(instance.objective, instance.constraint_set)
        # each round reads the gradient for the LMO, then again for the certificate at the new iterate
        lmo_gradients = seen[0::2]
        self.assertEqual(len(lmo_gradients), trace.iterations)
        for t, (M, measured) in enumerate(zip(lmo_gradients, trace.per_round("time_cost"))):
            values = np.linalg.svd(M, compute_uv=False)
            p = values[0] ** 2 / np.sum(values**2)
            delta = schedule.qtsve_delta(t, sigma_upper_estimate(M, model))
            expected = qtsve_cost(float(np.linalg.norm(M)), 50, p, (values[0] - values[1]) / 2.0, delta)
            self.assertAlmostEqual(measured, expected, delta=1e-9 * expected)

    def test_qpm_worst_case_run_is_certified(self):
        # a single active singular value keeps the spectral gap of the gradient open at the optimum
        instance = make_planted_spectrum(20, [0.9, 0.5, 0.2], seed=7, radius=0.3)
        trace = qfw_matrix_qpm_run(
            instance.gradient_callback, instance.objective, instance.constraint_set, 0.1, ErrorModel("worst_case")
        )
        self.assertTrue(trace.slack_certified())
        for record in trace.records:
            self.assertAlmostEqual(record.slack_budget, 0.3 * 0.1)
            self.assertLessEqual(record.slack, record.slack_budget)
        self.assertLessEqual(instance.primal_gap(trace.final_value), 0.1)

    def test_qpm_runs_converge_over_seeds(self):
        for seed in range(3):
            with self.subTest(seed=seed):
                instance = make_planted_spectrum(20, [0.9, 0.3], seed=seed, radius=0.5)
                trace = qfw_matrix_qpm_run(
                    instance.gradient_callback, instance.objective, instance.constraint_set, 0.1,
                    ErrorModel("consistent", seed=seed),
                )
                self.assertLessEqual(instance.primal_gap(trace.final_value), instance.tolerance(0.1))
                self.assertTrue(trace.slack_certified())

    def test_sigma_upper_estimate(self):
        M = np.diag([2.0, 1.0, 0.5])
        upper = sigma_upper_estimate(M, ErrorModel())
        self.assertGreaterEqual(upper, 2.0)
        self.assertLessEqual(upper, 2.0 + 0.25 * math.sqrt(5.25) + 1e-9)
        with self.assertRaises(DegenerateInputError):
            sigma_upper_estimate(np.zeros((2, 2)), ErrorModel())


class TestMaxFindingEndToEnd(unittest.TestCase):
    """Quantum l1 runs at d=100 succeed with the configured probability."""

    def test_success_frequency_over_seeds(self):
        eps, p_fail, seeds = 0.05, 0.05, range(10)
        successes = 0
        for seed in seeds:
            instance = make_least_squares_l1(d=100, n_rows=100, sparsity=3, noise=0.0, seed=seed)
            trace = qfw_vector_run(
                instance.objective, instance.constraint_set, eps, p_fail, ErrorModel("consistent", seed=seed)
            )
            self.assertEqual(trace.iterations, math.ceil(4.0 * instance.objective.curvature / eps) - 2)
            successes += instance.primal_gap(trace.final_value) <= instance.tolerance(eps)
        self.assertGreaterEqual(successes / len(seeds), 1.0 - p_fail - 0.05)


if __name__ == "__main__":
    unittest.main()
