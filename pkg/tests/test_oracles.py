#!/usr/bin/env python
"""
Test module for the gradient estimators.

This module contains tests for:
- Forward-difference partials and gradients, with their charges and error bound
- Bounded error injection in every error mode
- The one-query gradient emulator, including injected failures
"""

import math
import os
import sys
import unittest

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

try:
    from qfw.domain import ErrorModel, QueryLedger, SmoothObjective
    from qfw.errors import InvalidArgumentError
    from qfw.oracles import (
        bounded_error_inject,
        fd_component,
        fd_gradient,
        jordan_error_bound,
        jordan_gradient_emulate,
        signs,
    )
except ImportError as e:
    raise ImportError(f"Failed to import qfw.oracles. Original error: {e}")


def quadratic(Q, c, with_gradient=True):
    """f(x) = 1/2 x^T Q x + c^T x with L = ||Q||_2."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    return SmoothObjective(
        value_fn=lambda x: 0.5 * float(x @ Q @ x) + float(c @ x),
        gradient_fn=(lambda x: Q @ x + c) if with_gradient else None,
        smoothness=float(np.linalg.norm(Q, ord=2)),
        diameter=2.0,
    )


class TestForwardDifferences(unittest.TestCase):
    """Charged forward differences."""

    def test_component_value_and_charge(self):
        objective = SmoothObjective(value_fn=lambda x: float(x[0] ** 2), smoothness=2.0, diameter=2.0)
        ledger = QueryLedger()
        value, queries = fd_component(objective, [1.0], 0, 0.1, ledger)
        self.assertAlmostEqual(value, 2.1)
        self.assertEqual(queries, 2)
        self.assertEqual(ledger.totals().function_queries, 2)

    def test_component_rejects_bad_input(self):
        objective = quadratic(np.eye(2), np.zeros(2))
        with self.assertRaises(InvalidArgumentError):
            fd_component(objective, np.zeros(2), 0, 0.0)
        with self.assertRaises(InvalidArgumentError):
            fd_component(objective, np.zeros(2), 5, 0.1)

    def test_gradient_within_bound(self):
        rng = np.random.default_rng(11)
        B = rng.normal(size=(6, 6))
        objective = quadratic(B.T @ B, rng.normal(size=6))
        ledger = QueryLedger()
        x = rng.uniform(-0.2, 0.2, size=6)
        estimate = fd_gradient(objective, x, 1e-3, ledger)
        self.assertEqual(estimate.charged_queries, 7)
        self.assertEqual(ledger.totals().function_queries, 7)
        self.assertAlmostEqual(estimate.l2_bound, math.sqrt(6) * objective.smoothness * 1e-3 / 2)
        error = np.linalg.norm(estimate.g - objective.gradient(x))
        self.assertLessEqual(error, estimate.l2_bound + 1e-9)

    def test_signs_treat_zero_as_positive(self):
        np.testing.assert_array_equal(signs(np.array([0.0, -1.0, 2.0])), [1.0, -1.0, 1.0])


class TestBoundedErrorInject(unittest.TestCase):
    """Perturbations stay inside the l-infinity bound."""

    def setUp(self):
        self.g = np.array([1.0, -3.0, 2.0])

    def test_exact_mode_returns_copy(self):
        out = bounded_error_inject(self.g, 0.5, ErrorModel("exact"))
        np.testing.assert_array_equal(out, self.g)
        self.assertIsNot(out, self.g)

    def test_worst_case_abs_attacks_leader(self):
        out = bounded_error_inject(self.g, 0.5, ErrorModel("worst_case"))
        np.testing.assert_allclose(out, [1.5, -2.5, 2.5])

    def test_worst_case_max_and_min(self):
        model = ErrorModel("worst_case")
        np.testing.assert_allclose(bounded_error_inject(self.g, 0.5, model, target="max"), [1.5, -2.5, 1.5])
        np.testing.assert_allclose(bounded_error_inject(self.g, 0.5, model, target="min"), [0.5, -2.5, 1.5])

    def test_random_modes_within_bound(self):
        for mode in ("uniform", "consistent"):
            out = bounded_error_inject(self.g, 0.25, ErrorModel(mode, seed=4))
            self.assertLessEqual(np.max(np.abs(out - self.g)), 0.25)

    def test_consistent_mode_is_repeatable(self):
        model = ErrorModel("consistent", seed=9)
        np.testing.assert_array_equal(
            bounded_error_inject(self.g, 0.1, model),
            bounded_error_inject(self.g, 0.1, model),
        )

    def test_rejects_bad_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            bounded_error_inject(self.g, -0.1, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            bounded_error_inject(self.g, 0.1, ErrorModel(), target="median")


class TestJordanEmulation(unittest.TestCase):
    """The one-query gradient routine's error contract."""

    def setUp(self):
        self.objective = quadratic(np.diag([1.0, 2.0, 3.0]), [0.5, -0.5, 0.0])
        self.x = np.array([0.1, 0.2, -0.3])

    def test_error_bound_formula(self):
        self.assertAlmostEqual(jordan_error_bound(2, 1.0, 1e-3, 0.5), 0.32 * math.pi)

    def test_charges_one_query(self):
        ledger = QueryLedger()
        estimate = jordan_gradient_emulate(
            self.objective, self.x, 1e-4, 0.1, ErrorModel(seed=1), ledger=ledger
        )
        self.assertEqual(estimate.charged_queries, 1)
        self.assertEqual(ledger.totals().quantum_queries, 1)
        self.assertEqual(ledger.totals().function_queries, 0)
        self.assertAlmostEqual(estimate.failure_prob, 0.1)
        if not estimate.failed:
            error = np.max(np.abs(estimate.g - self.objective.gradient(self.x)))
            self.assertLessEqual(error, estimate.linf_bound + 1e-12)

    def test_exact_mode_returns_gradient(self):
        estimate = jordan_gradient_emulate(self.objective, self.x, 1e-4, 1.0, ErrorModel("exact"))
        np.testing.assert_allclose(estimate.g, self.objective.gradient(self.x))
        self.assertFalse(estimate.failed)

    def test_failure_produces_visible_outlier(self):
        estimate = jordan_gradient_emulate(self.objective, self.x, 1e-4, 1.0, ErrorModel("uniform", seed=2))
        self.assertTrue(estimate.failed)
        error = np.max(np.abs(estimate.g - self.objective.gradient(self.x)))
        self.assertGreater(error, estimate.linf_bound)

    def test_rejects_bad_arguments(self):
        model = ErrorModel()
        with self.assertRaises(InvalidArgumentError):
            jordan_gradient_emulate(self.objective, self.x, 1e-4, 0.0, model)
        with self.assertRaises(InvalidArgumentError):
            jordan_gradient_emulate(self.objective, self.x, 1e-4, 1.5, model)
        with self.assertRaises(InvalidArgumentError):
            jordan_gradient_emulate(self.objective, self.x, 0.0, 0.5, model)
        no_gradient = quadratic(np.eye(3), np.zeros(3), with_gradient=False)
        with self.assertRaises(InvalidArgumentError):
            jordan_gradient_emulate(no_gradient, self.x, 1e-4, 0.5, model)


if __name__ == "__main__":
    unittest.main()
