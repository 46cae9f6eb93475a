#!/usr/bin/env python
"""
Test module for top singular pair extraction.

This module contains tests for:
- The exact SVD reference and the sign convention
- The classical power method and its charges
- The QTSVE emulator: precision, spectral-gap precondition and cost
- Noisy matrix-vector chains and their accumulated error bound
- The QPM emulator
"""

import math
import os
import sys
import unittest

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

try:
    from config import get_solver_config
    from qfw.domain import ErrorModel, QueryLedger
    from qfw.errors import DegenerateInputError, InvalidArgumentError, PreconditionError
    from qfw.lmo_matrix import (
        bilinear_slack,
        chain_error_bound,
        exact_top_pair,
        noisy_linear_chain,
        noisy_unit_matvec,
        polylog,
        power_method_classical,
        qpm_chain_cost,
        qpm_emulate,
        qtsve_cost,
        qtsve_emulate,
        sign_convention,
        tangent_perturb,
    )
except ImportError as e:
    raise ImportError(f"Failed to import qfw.lmo_matrix. Original error: {e}")


class TestHelpers(unittest.TestCase):
    """Small building blocks shared by the extractors."""

    def test_exact_top_pair(self):
        triple = exact_top_pair(np.diag([3.0, 1.0]))
        self.assertAlmostEqual(triple.sigma_hat, 3.0)
        np.testing.assert_allclose(np.abs(triple.u), [1.0, 0.0], atol=1e-12)
        self.assertGreater(triple.u[0], 0)

    def test_sign_convention(self):
        u, v = sign_convention(np.array([0.0, -0.6, 0.8]), np.array([1.0, 0.0]))
        np.testing.assert_array_equal(u, [0.0, 0.6, -0.8])
        np.testing.assert_array_equal(v, [-1.0, 0.0])

    def test_bilinear_slack(self):
        self.assertAlmostEqual(bilinear_slack(np.diag([2.0, 1.0]), 0.1), 0.4)

    def test_tangent_perturb_moves_exact_chord(self):
        rng = np.random.default_rng(0)
        x = np.array([1.0, 0.0, 0.0, 0.0])
        y = tangent_perturb(x, 0.3, rng)
        self.assertAlmostEqual(np.linalg.norm(y), 1.0)
        self.assertAlmostEqual(np.linalg.norm(y - x), 0.3)
        np.testing.assert_array_equal(tangent_perturb(x, 0.0, rng), x)

    def test_polylog_floor(self):
        self.assertEqual(polylog(2), 1.0)
        self.assertAlmostEqual(polylog(100), math.log(100) ** 3)


class TestPowerMethod(unittest.TestCase):
    """Classical power method on M^T M."""

    def test_converges_and_charges(self):
        ledger = QueryLedger()
        M = np.diag([2.0, 1.0, 0.5])
        triple = power_method_classical(M, 1e-3, ErrorModel(seed=2), ledger=ledger)
        self.assertAlmostEqual(triple.sigma_hat, 2.0, delta=1e-3)
        self.assertAlmostEqual(abs(triple.v[0]), 1.0, places=6)
        self.assertEqual(ledger.totals().matvecs, triple.matvecs)
        self.assertEqual(triple.matvecs % 2, 0)
        self.assertAlmostEqual(ledger.totals().time_cost, triple.matvecs / 2 * 9)

    def test_warm_up_iterations_are_charged(self):
        ledger = QueryLedger()
        # rank one: the warm-up lands on e_1 after one step, so its sigma estimate is exactly 2
        M = np.diag([2.0, 0.0, 0.0])
        triple = power_method_classical(M, 1.0, ErrorModel(seed=3), ledger=ledger)
        k = math.ceil(get_solver_config()["power_method_c0"] * 2.0 * math.log(3) / 1.0)
        self.assertEqual(triple.matvecs, 2 * (k + 8))
        self.assertEqual(ledger.totals().matvecs, 2 * (k + 8))
        self.assertAlmostEqual(triple.charged_cost, (k + 8) * 9.0)

    def test_fixed_iteration_count_has_no_warm_up(self):
        triple = power_method_classical(np.diag([2.0, 1.0]), 1.0, ErrorModel(), iterations=5)
        self.assertEqual(triple.matvecs, 10)
        self.assertAlmostEqual(triple.charged_cost, 20.0)

    def test_rectangular_matrix(self):
        rng = np.random.default_rng(4)
        M = rng.normal(size=(3, 5))
        triple = power_method_classical(M, 1e-4, ErrorModel(), iterations=500)
        self.assertEqual(triple.u.shape, (3,))
        self.assertEqual(triple.v.shape, (5,))
        self.assertAlmostEqual(triple.sigma_hat, np.linalg.norm(M, ord=2), places=6)

    def test_zero_matrix(self):
        triple = power_method_classical(np.zeros((2, 2)), 0.1, ErrorModel())
        self.assertEqual(triple.sigma_hat, 0.0)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            power_method_classical(np.eye(2), 0.0, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            power_method_classical(np.eye(2), 0.1, ErrorModel(), iterations=0)


class TestQtsve(unittest.TestCase):
    """Emulated singular value estimation."""

    def setUp(self):
        self.M = np.diag([3.0, 1.0, 0.5])

    def test_exact_mode(self):
        triple = qtsve_emulate(self.M, 0.5, 0.1, ErrorModel("exact"))
        self.assertAlmostEqual(triple.sigma_hat, 3.0)
        np.testing.assert_allclose(triple.v, [1.0, 0.0, 0.0], atol=1e-12)

    def test_worst_case_precision(self):
        triple = qtsve_emulate(self.M, 0.5, 0.1, ErrorModel("worst_case"))
        self.assertAlmostEqual(triple.sigma_hat, 2.5)
        self.assertAlmostEqual(np.linalg.norm(triple.v - np.array([1.0, 0.0, 0.0])), 0.1)
        self.assertAlmostEqual(np.linalg.norm(triple.u - np.array([1.0, 0.0, 0.0])), 0.1)

    def test_consistent_mode_within_precision(self):
        for seed in range(5):
            triple = qtsve_emulate(self.M, 0.4, 0.2, ErrorModel("consistent", seed=seed))
            self.assertLessEqual(abs(triple.sigma_hat - 3.0), 0.4 + 1e-12)
            self.assertLessEqual(np.linalg.norm(triple.v - np.array([1.0, 0.0, 0.0])), 0.2 + 1e-12)

    def test_gap_precondition(self):
        with self.assertRaises(PreconditionError):
            qtsve_emulate(np.diag([1.0, 0.9, 0.1]), 0.06, 0.1, ErrorModel())

    def test_gap_from_values_only_svd_is_accepted(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            M = rng.standard_normal((40, 40))
            values = np.linalg.svd(M, compute_uv=False)
            half_gap = (values[0] - values[1]) / 2.0
            triple = qtsve_emulate(M, half_gap, 0.1, ErrorModel("worst_case"))
            self.assertAlmostEqual(triple.sigma_hat, values[0] - half_gap, delta=1e-9)

    def test_precomputed_svd(self):
        M = np.random.default_rng(22).standard_normal((6, 4))
        svd = np.linalg.svd(M)
        half_gap = (svd[1][0] - svd[1][1]) / 2.0
        model = ErrorModel("consistent", seed=4)
        given = qtsve_emulate(M, half_gap, 0.1, model, svd=svd)
        computed = qtsve_emulate(M, half_gap, 0.1, model)
        self.assertEqual(given.sigma_hat, computed.sigma_hat)
        np.testing.assert_array_equal(given.u, computed.u)
        np.testing.assert_array_equal(given.v, computed.v)

    def test_zero_matrix(self):
        with self.assertRaises(DegenerateInputError):
            qtsve_emulate(np.zeros((2, 2)), 0.0, 0.1, ErrorModel())

    def test_rejects_bad_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            qtsve_emulate(self.M, 0.1, 1.0, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            qtsve_emulate(self.M, -0.1, 0.1, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            qtsve_emulate(self.M, 0.1, 0.1, ErrorModel(), repetitions=0)

    def test_charged_cost(self):
        ledger = QueryLedger()
        triple = qtsve_emulate(self.M, 0.5, 0.1, ErrorModel(), ledger=ledger)
        p = 9.0 / (9.0 + 1.0 + 0.25)
        expected = math.sqrt(10.25) * 3 * polylog(3) / (math.sqrt(p) * 0.5 * 0.01)
        self.assertAlmostEqual(triple.charged_cost, expected, delta=1e-9 * expected)
        self.assertAlmostEqual(qtsve_cost(math.sqrt(10.25), 3, p, 0.5, 0.1), expected, delta=1e-9 * expected)
        self.assertAlmostEqual(ledger.totals().time_cost, triple.charged_cost)

    def test_repetitions_multiply_cost(self):
        once = qtsve_emulate(self.M, 0.5, 0.1, ErrorModel(seed=1))
        thrice = qtsve_emulate(self.M, 0.5, 0.1, ErrorModel(seed=1), repetitions=3)
        self.assertAlmostEqual(thrice.charged_cost, 3 * once.charged_cost)


class TestChains(unittest.TestCase):
    """Noisy matrix-vector products and chains."""

    def test_chain_error_bound(self):
        self.assertAlmostEqual(chain_error_bound(1.0, 5, 0.1), 0.5)
        self.assertAlmostEqual(chain_error_bound(2.0, 3, 1.0), 7.0)

    def test_linear_chain_within_bound(self):
        rng = np.random.default_rng(8)
        M = rng.normal(size=(4, 4))
        M *= 1.1 / np.linalg.norm(M, ord=2)
        z0 = np.ones(4) / 2.0
        for mode in ("worst_case", "uniform", "consistent"):
            comparison = noisy_linear_chain(M, z0, 12, 1e-3, ErrorModel(mode, seed=3))
            self.assertLessEqual(comparison.deviation, comparison.bound + 1e-12)

    def test_unit_matvec(self):
        ledger = QueryLedger()
        z = np.array([1.0, 0.0])
        step = noisy_unit_matvec(np.diag([2.0, 1.0]), z, 0.05, ErrorModel("worst_case"), ledger=ledger)
        self.assertAlmostEqual(step.gamma, 2.0)
        self.assertAlmostEqual(np.linalg.norm(step.vector), 1.0)
        self.assertAlmostEqual(np.linalg.norm(step.vector - np.array([1.0, 0.0])), 0.05)
        self.assertEqual(ledger.totals().matvecs, 1)

    def test_unit_matvec_rejects_collapse(self):
        with self.assertRaises(DegenerateInputError):
            noisy_unit_matvec(np.diag([0.0, 1.0]), np.array([1.0, 0.0]), 0.1, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            noisy_unit_matvec(np.eye(2), np.array([2.0, 0.0]), 0.1, ErrorModel())


class TestQpm(unittest.TestCase):
    """Emulated quantum power method."""

    def test_exact_mode_finds_top_pair(self):
        ledger = QueryLedger()
        M = np.diag([1.0, 0.5, 0.1])
        triple = qpm_emulate(M, 50, 0.0, 0.0, ErrorModel("exact"), ledger=ledger)
        self.assertAlmostEqual(triple.sigma_hat, 1.0, places=9)
        np.testing.assert_allclose(triple.v, [1.0, 0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(triple.u, [1.0, 0.0, 0.0], atol=1e-9)
        self.assertEqual(ledger.totals().matvecs, 100)
        self.assertEqual(triple.matvecs, 100)
        self.assertGreater(triple.chain_floor, 0.0)

    def test_noisy_mode_stays_close(self):
        M = np.diag([2.0, 0.5, 0.1])
        triple = qpm_emulate(M, 40, 0.01, 0.01, ErrorModel("worst_case"))
        self.assertGreater(abs(triple.v[0]), 0.99)
        self.assertGreater(triple.sigma_hat, 1.9)

    def test_chain_cost_formula(self):
        chain = 10 * 1.0 * math.log(10.0) / (0.1 * 0.5)
        tomography = 3 * math.log(3.0) / 0.04
        self.assertAlmostEqual(qpm_chain_cost(10, 1.0, 0.9, 0.5, 3, 0.1, 0.2), chain * tomography, places=6)

    def test_cost_scales_with_square_root_of_rank(self):
        d = 16
        rng = np.random.default_rng(3)
        start = rng.standard_normal((d, d))
        start[:, 0] = 1.0
        Q, _ = np.linalg.qr(start)
        costs = {}
        for r in (2, 8):
            M = Q @ np.diag([0.9] * r + [0.0] * (d - r)) @ Q.T
            triple = qpm_emulate(M, 20, 0.1, 0.1, ErrorModel("exact"))
            self.assertAlmostEqual(triple.chain_floor, 0.81, places=9)
            costs[r] = triple.charged_cost
        self.assertAlmostEqual(costs[8] / costs[2], 2.0, places=6)

    def test_rejects_bad_input(self):
        with self.assertRaises(DegenerateInputError):
            qpm_emulate(np.zeros((2, 2)), 5, 0.1, 0.1, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            qpm_emulate(np.eye(2), 0, 0.1, 0.1, ErrorModel())
        with self.assertRaises(InvalidArgumentError):
            qpm_emulate(np.eye(2), 5, 1.0, 0.1, ErrorModel())


if __name__ == "__main__":
    unittest.main()
