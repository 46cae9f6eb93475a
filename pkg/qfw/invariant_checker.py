#!/usr/bin/env python
"""
Invariant checker for the Frank-Wolfe solvers.

This module runs the desk-scale verification suite: proved bounds checked as
executable invariants (convergence, finite-difference error, maximum-finding
slack, bilinear perturbation, chain error accumulation), reductions between
variants, and byte-level determinism of the run files. Each check reports a
measured quantity against its bound.
"""

import filecmp
import logging
import math
import os
import sys
import tempfile
import traceback
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypedDict

import numpy as np

# Ensure the parent directory is in sys.path
parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

from qfw.cost_model import loglog_slope
from qfw.domain import ConstraintSet, ErrorModel, L1Ball, QueryLedger, SmoothObjective
from qfw.errors import ConfigError, PreconditionError
from qfw.fw_engine import RunTrace, Schedule, exact_fw_run, fw_run, qfw_group_run, qfw_jordan_run, qfw_vector_run
from qfw.lmo_matrix import (
    bilinear_slack,
    exact_top_pair,
    noisy_linear_chain,
    power_method_classical,
    qpm_emulate,
    qtsve_emulate,
    tangent_perturb,
)
from qfw.lmo_vector import (
    LmoResult,
    duerr_hoyer_max_find,
    exact_lmo_group,
    exact_lmo_l1,
    qlmo_group,
    qlmo_l1,
    qlmo_simplex,
)
from qfw.oracles import bounded_error_inject, fd_gradient, jordan_gradient_emulate
from qfw.problems import (
    ProblemInstance,
    brute_force_lmo,
    make_group_instance,
    make_least_squares_l1,
    make_simplex_quadratic,
)

# Configure logging
logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("invariant_checker")

SUITES = ("vector", "oracles", "lmo", "matrix", "group", "determinism")

# Floating-point allowance on inequalities that hold exactly in real arithmetic
_ROUNDOFF = 1e-12

# (measured, bound, details)
CheckOutcome = Tuple[float, float, str]


class InvariantResult(TypedDict):
    """Outcome of one invariant check."""
    invariant: str
    suite: str
    passed: bool
    measured: float
    bound: float
    details: str


def quadratic_objective(Q: np.ndarray, c: np.ndarray, diameter: float, name: str = "quadratic") -> SmoothObjective:
    """f(x) = 1/2 x'Qx + c'x for symmetric PSD Q; L = ||Q||_2."""
    return SmoothObjective(
        value_fn=lambda x: 0.5 * float(x @ Q @ x) + float(c @ x),
        gradient_fn=lambda x: Q @ x + c,
        smoothness=float(np.linalg.norm(Q, ord=2)),
        diameter=diameter,
        name=name,
    )


def shifted_norm_objective(center: np.ndarray, diameter: float = 2.0) -> SmoothObjective:
    """f(x) = 1/2 ||x - center||^2 without forming a d x d matrix; L = 1."""
    return SmoothObjective(
        value_fn=lambda x: 0.5 * float(np.sum((x - center) ** 2)),
        gradient_fn=lambda x: x - center,
        smoothness=1.0,
        diameter=diameter,
        name="shifted_norm",
    )


# (objective, x, sigma_t) -> LmoResult
SampledOracle = Callable[[SmoothObjective, np.ndarray, float], LmoResult]


def _l1_point(rng: np.random.Generator, ball: L1Ball) -> np.ndarray:
    v = rng.standard_normal(ball.dimension)
    return v * (ball.radius * float(rng.uniform()) / float(np.abs(v).sum()))


def _recorded_run(
    objective: SmoothObjective, constraint_set: ConstraintSet, oracle: SampledOracle, T: int
) -> Tuple[RunTrace, List[np.ndarray]]:
    """Frank-Wolfe run that keeps every iterate, the final one included."""
    schedule = Schedule.for_problem(objective, constraint_set)
    visited: List[np.ndarray] = []

    def lmo(x: np.ndarray, t: int, gamma: float) -> LmoResult:
        visited.append(x.copy())
        return oracle(objective, x, schedule.fd_step(t))

    trace = fw_run(objective, constraint_set, lmo, schedule, constraint_set.initial_point(), T)
    visited.append(trace.final_iterate)
    return trace, visited


class InvariantChecker:
    """
    Registry of invariant checks grouped into suites.

    Checks are named "<suite>.<name>"; a check that raises is reported as a
    failed row carrying the exception text rather than aborting the suite.
    """

    def __init__(self, seed: int = 0):
        """
        Initialize the checker.

        Args:
            seed: Base seed of every randomized check.
        """
        self.seed = int(seed)
        self.logger = logging.getLogger("invariant_checker")
        self.checks: Dict[str, Callable[[], CheckOutcome]] = {
            "vector.convergence_bound": self.check_convergence_bound,
            "vector.ledger_consistency": self.check_ledger_consistency,
            "vector.sqrt_d_query_scaling": self.check_sqrt_d_scaling,
            "vector.jordan_single_query": self.check_jordan_single_query,
            "vector.iterate_feasibility": self.check_iterate_feasibility,
            "vector.best_gap_monotone": self.check_best_gap_monotone,
            "vector.fd_step_schedule": self.check_fd_step_schedule,
            "vector.curvature_samples": self.check_curvature_samples,
            "oracles.fd_error_bound": self.check_fd_error_bound,
            "oracles.injection_within_bound": self.check_injection_bound,
            "oracles.jordan_linf_contract": self.check_jordan_contract,
            "oracles.gradient_determinism": self.check_gradient_determinism,
            "lmo.maxfind_slack": self.check_maxfind_slack,
            "lmo.l1_vertex_agreement": self.check_l1_vertex_agreement,
            "lmo.group_vertex_agreement": self.check_group_vertex_agreement,
            "matrix.bilinear_slack": self.check_bilinear_slack,
            "matrix.chain_error_accumulation": self.check_chain_accumulation,
            "matrix.qpm_zero_noise_matches_power": self.check_qpm_matches_power,
            "matrix.qtsve_vector_precision": self.check_qtsve_precision,
            "matrix.qtsve_gap_precondition": self.check_qtsve_precondition,
            "matrix.qtsve_consistent_determinism": self.check_qtsve_determinism,
            "group.singleton_reduction": self.check_singleton_reduction,
            "group.two_group_convergence": self.check_two_group_convergence,
            "determinism.run_files": self.check_run_file_determinism,
        }

    def select(self, filters: Optional[Sequence[str]] = None) -> List[str]:
        """
        Names of the checks matching any filter (a suite name or a name prefix).

        Raises:
            ConfigError: If a filter matches nothing.
        """
        if not filters:
            return list(self.checks)
        selected = []
        for pattern in filters:
            matched = [name for name in self.checks if name.split(".")[0] == pattern or name.startswith(pattern)]
            if not matched:
                raise ConfigError(f"filter '{pattern}' matches no invariant (suites: {', '.join(SUITES)})")
            selected.extend(name for name in matched if name not in selected)
        return selected

    def run(self, filters: Optional[Sequence[str]] = None) -> List[InvariantResult]:
        """
        Run the selected checks.

        Args:
            filters: Suite names or check-name prefixes; all checks when empty.

        Returns:
            List[InvariantResult]: One row per check, in registry order.
        """
        results = []
        for name in self.select(filters):
            self.logger.info(f"Checking {name}...")
            results.append(self.run_check(name))
        failed = [r["invariant"] for r in results if not r["passed"]]
        self.logger.info(f"{len(results) - len(failed)}/{len(results)} invariants hold")
        return results

    def run_check(self, name: str) -> InvariantResult:
        suite = name.split(".")[0]
        try:
            measured, bound, details = self.checks[name]()
            passed = bool(measured <= bound)
            if not passed:
                self.logger.warning(f"{name} violated: measured {measured:.6g} > bound {bound:.6g}")
            return {
                "invariant": name,
                "suite": suite,
                "passed": passed,
                "measured": float(measured),
                "bound": float(bound),
                "details": details,
            }
        except Exception as e:
            self.logger.error(f"Error while checking {name}: {e}")
            self.logger.debug(traceback.format_exc())
            return {
                "invariant": name,
                "suite": suite,
                "passed": False,
                "measured": math.nan,
                "bound": math.nan,
                "details": f"{type(e).__name__}: {e}",
            }

    def _rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *key])

    # --- vector ---

    def check_convergence_bound(self) -> CheckOutcome:
        """Exact-LMO primal gap stays under 4 C_f / (t+2) for 1000 steps."""
        instance = make_least_squares_l1(100, 100, 5, 0.0, self.seed)
        trace = exact_fw_run(instance.objective, instance.constraint_set, 1000)
        excess = trace.primal_gaps(instance.reference_optimum) - trace.h_bounds()
        return float(excess.max()), 0.0, f"T=1000, C_f={trace.curvature:.4g}, f*={instance.reference_optimum:.3g}"

    def check_ledger_consistency(self) -> CheckOutcome:
        """Ledger totals equal the sum of the per-iteration entries after a quantum run."""
        instance = make_least_squares_l1(12, 12, 3, 0.0, self.seed)
        trace = qfw_vector_run(instance.objective, instance.constraint_set, 0.5, 0.05, ErrorModel(seed=self.seed))
        totals = trace.ledger.totals()
        summed = trace.ledger.summed_entries()
        diff = max(
            abs(getattr(totals, c) - getattr(summed, c))
            for c in ("function_queries", "quantum_queries", "matvecs", "gradient_evaluations", "time_cost")
        )
        infeasible = 0.0 if instance.constraint_set.contains(trace.final_iterate) else 1.0
        return float(diff + infeasible), 0.0, f"{trace.iterations} entries, final iterate feasible={not infeasible}"

    def check_sqrt_d_scaling(self) -> CheckOutcome:
        """Per-round function queries of the quantum l1 LMO grow like sqrt(d)."""
        dims = [64, 256, 1024, 4096]
        queries = []
        model = ErrorModel(seed=self.seed)
        for d in dims:
            c = self._rng(d).standard_normal(d)
            objective = shifted_norm_objective(c)
            ledger = QueryLedger()
            qlmo_l1(objective, np.zeros(d), 1e-3, 1.0, 0.01, model, ledger=ledger)
            queries.append(ledger.totals().function_queries)
        slope = loglog_slope(dims, queries)
        return abs(slope - 0.5), 0.1, f"slope={slope:.4f} over d={dims}"

    def check_jordan_single_query(self) -> CheckOutcome:
        """The one-query gradient variant charges exactly one quantum query per round."""
        worst = 0.0
        for d in (16, 64):
            c = self._rng(d).standard_normal(d)
            objective = shifted_norm_objective(c)
            trace = qfw_jordan_run(objective, L1Ball(d), 2.0, 0.05, ErrorModel(seed=self.seed))
            worst = max(worst, float(np.max(np.abs(trace.per_round("quantum_queries") - 1.0))))
        return worst, 0.0, "d in (16, 64)"

    def check_iterate_feasibility(self) -> CheckOutcome:
        """Every iterate of worst-case runs over an l1 ball, a simplex and overlapping groups is feasible."""
        model = ErrorModel(mode="worst_case", seed=self.seed)
        least_squares = make_least_squares_l1(12, 12, 3, 0.0, self.seed)
        simplex = make_simplex_quadratic(8, self.seed)
        group = make_group_instance([[0, 1, 2], [2, 3, 4]], [2.0, math.inf], self.seed)
        ball = group.constraint_set

        def l1_oracle(f: SmoothObjective, x: np.ndarray, sigma: float) -> LmoResult:
            return qlmo_l1(f, x, sigma, 1.0, 0.01, model)

        def simplex_oracle(f: SmoothObjective, x: np.ndarray, sigma: float) -> LmoResult:
            return qlmo_simplex(f, x, sigma, 0.01, model)

        def group_oracle(f: SmoothObjective, x: np.ndarray, sigma: float) -> LmoResult:
            return qlmo_group(f, x, sigma, 0.01, ball.groups, ball.p_norms, model, radius=ball.radius)

        cases: List[Tuple[ProblemInstance, SampledOracle]] = [
            (least_squares, l1_oracle),
            (simplex, simplex_oracle),
            (group, group_oracle),
        ]
        outside = 0
        visited_total = 0
        for instance, oracle in cases:
            trace, visited = _recorded_run(instance.objective, instance.constraint_set, oracle, 30)
            outside += sum(not instance.constraint_set.contains(x) for x in visited)
            outside += sum(not r.feasible for r in trace.records)
            visited_total += len(visited)
        return float(outside), 0.0, f"{visited_total} iterates over l1, simplex and overlapping groups"

    def check_best_gap_monotone(self) -> CheckOutcome:
        """best_gap is the running minimum of the duality gap."""
        instance = make_least_squares_l1(16, 16, 3, 0.0, self.seed)
        model = ErrorModel(mode="uniform", seed=self.seed)
        trace = qfw_vector_run(instance.objective, instance.constraint_set, 0.5, 0.05, model)
        gaps = np.array([r.duality_gap for r in trace.records])
        best = np.array([r.best_gap for r in trace.records])
        increase = float(np.max(np.diff(best), initial=0.0))
        mismatch = float(np.max(np.abs(best - np.minimum.accumulate(gaps))))
        return max(increase, mismatch), 0.0, f"{trace.iterations} steps"

    def check_fd_step_schedule(self) -> CheckOutcome:
        """sigma_t sqrt(d) L (t+2) radius reproduces C_f at every t."""
        rng = self._rng(14)
        worst = 0.0
        for _ in range(50):
            schedule = Schedule(
                curvature=float(rng.uniform(0.1, 10.0)),
                smoothness=float(rng.uniform(0.1, 10.0)),
                dim=int(rng.integers(1, 5000)),
                radius=float(rng.uniform(0.5, 3.0)),
            )
            for t in range(200):
                product = schedule.fd_step(t) * math.sqrt(schedule.dim) * schedule.smoothness * (t + 2.0)
                product *= schedule.radius
                worst = max(worst, abs(product - schedule.curvature) / schedule.curvature)
        return worst, 1e-12, "50 schedules, t < 200, relative error"

    def check_curvature_samples(self) -> CheckOutcome:
        """Sampled curvature 2/gamma^2 (f(y) - f(x) - <y - x, grad f(x)>) never exceeds L D^2."""
        rng = self._rng(15)
        worst = 0.0
        for _ in range(1000):
            d = int(rng.integers(2, 21))
            ball = L1Ball(d, radius=float(rng.uniform(0.5, 2.0)))
            B = rng.standard_normal((d, d))
            objective = quadratic_objective(B @ B.T / d, rng.standard_normal(d), ball.diameter())
            x = _l1_point(rng, ball)
            s = _l1_point(rng, ball)
            gamma = float(rng.uniform(0.05, 1.0))
            y = x + gamma * (s - x)
            excess = objective.value(y) - objective.value(x) - float((y - x) @ objective.gradient(x))
            worst = max(worst, 2.0 / gamma**2 * excess / objective.curvature)
        return worst, 1.0 + 1e-9, "1000 draws over l1 balls, measured as a fraction of L D^2"

    # --- oracles ---

    def check_fd_error_bound(self) -> CheckOutcome:
        """||g - grad f||_2 <= sqrt(d) L sigma / 2 over 1000 random quadratics."""
        rng = self._rng(4)
        violations = 0
        worst_ratio = 0.0
        for _ in range(1000):
            d = int(rng.integers(2, 21))
            B = rng.standard_normal((d, d))
            Q = B @ B.T / d
            objective = quadratic_objective(Q, rng.standard_normal(d), 2.0)
            x = rng.uniform(-1.0, 1.0, d)
            sigma = float(10 ** rng.uniform(-3, 0))
            estimate = fd_gradient(objective, x, sigma)
            error = float(np.linalg.norm(estimate.g - objective.gradient(x)))
            if error > estimate.l2_bound * (1 + 1e-9) + 1e-10:
                violations += 1
            if estimate.l2_bound > 0:
                worst_ratio = max(worst_ratio, error / estimate.l2_bound)
        return float(violations), 0.0, f"1000 draws, worst error/bound={worst_ratio:.4f}"

    def check_injection_bound(self) -> CheckOutcome:
        """Injected errors stay within eps in l-infinity norm in every noisy mode."""
        rng = self._rng(5)
        worst = 0.0
        for mode in ("worst_case", "uniform", "consistent"):
            model = ErrorModel(mode=mode, seed=self.seed)
            for target in ("abs", "max", "min"):
                for _ in range(50):
                    g = rng.standard_normal(int(rng.integers(1, 30)))
                    eps = float(rng.uniform(0.0, 1.0))
                    noisy = bounded_error_inject(g, eps, model, rng=rng, target=target)
                    worst = max(worst, float(np.max(np.abs(noisy - g))) - eps)
        return worst, _ROUNDOFF, "450 draws across modes and targets"

    def check_jordan_contract(self) -> CheckOutcome:
        """Non-failed one-query gradient estimates are within B of the gradient."""
        rng = self._rng(6)
        violations = 0
        failures = 0
        for i in range(300):
            d = int(rng.integers(2, 10))
            objective = quadratic_objective(np.eye(d), rng.standard_normal(d), 2.0)
            model = ErrorModel(mode=("worst_case", "uniform", "consistent")[i % 3], seed=self.seed + i)
            x = rng.uniform(-0.5, 0.5, d)
            estimate = jordan_gradient_emulate(objective, x, 1e-6, 0.1, model, rng=rng)
            if estimate.failed:
                failures += 1
                continue
            if np.max(np.abs(estimate.g - objective.gradient(x))) > estimate.linf_bound * (1 + 1e-9):
                violations += 1
        return float(violations), 0.0, f"300 draws, {failures} injected failures skipped"

    def check_gradient_determinism(self) -> CheckOutcome:
        """Gradient estimates repeat bit for bit for the same point, step and seed."""
        rng = self._rng(16)
        mismatches = 0
        for i in range(100):
            d = int(rng.integers(2, 12))
            objective = quadratic_objective(np.eye(d), rng.standard_normal(d), 2.0)
            x = rng.uniform(-0.5, 0.5, d)
            sigma = float(10 ** rng.uniform(-4, -1))
            first, second = fd_gradient(objective, x, sigma), fd_gradient(objective, x, sigma)
            mismatches += not np.array_equal(first.g, second.g)
            mode = ("consistent", "uniform", "worst_case")[i % 3]
            a, b = (jordan_gradient_emulate(objective, x, 1e-6, 0.1, ErrorModel(mode=mode, seed=self.seed + i))
                    for _ in range(2))
            mismatches += not (np.array_equal(a.g, b.g) and a.failed == b.failed)
        return float(mismatches), 0.0, "100 points, forward differences and one-query estimates"

    # --- lmo ---

    def check_maxfind_slack(self) -> CheckOutcome:
        """Adversarially perturbed maximum finding returns an index within 2 eps of the maximum."""
        rng = self._rng(7)
        model = ErrorModel(mode="worst_case", seed=self.seed)
        worst = -math.inf
        for _ in range(1000):
            d = int(rng.integers(2, 65))
            values = rng.standard_normal(d)
            eps = float(rng.uniform(0.001, 0.5))
            noisy = bounded_error_inject(values, eps, model, target="max")
            found = duerr_hoyer_max_find(noisy, d, 1e-6, model, rng=rng)
            worst = max(worst, float(values.max() - values[found.index] - 2.0 * eps))
        return worst, _ROUNDOFF, "1000 worst-case instances, delta=1e-6"

    def check_l1_vertex_agreement(self) -> CheckOutcome:
        """Exact l1 LMO matches vertex enumeration."""
        rng = self._rng(8)
        worst = 0.0
        for _ in range(200):
            d = int(rng.integers(1, 9))
            ball = L1Ball(d, radius=float(rng.uniform(0.5, 2.0)))
            g = rng.standard_normal(d)
            worst = max(worst, abs(exact_lmo_l1(g, ball.radius).inner_value - brute_force_lmo(ball, g).inner_value))
        return worst, _ROUNDOFF, "200 draws"

    def check_group_vertex_agreement(self) -> CheckOutcome:
        """Exact group LMO matches enumeration on overlapping l1 / l-infinity groups."""
        rng = self._rng(9)
        instance = make_group_instance([[0, 1, 2], [2, 3, 4]], [1.0, math.inf], self.seed)
        ball = instance.constraint_set
        worst = 0.0
        for _ in range(200):
            g = rng.standard_normal(ball.dimension)
            exact = exact_lmo_group(g, ball.groups, ball.p_norms, ball.radius)
            worst = max(worst, abs(exact.inner_value - brute_force_lmo(ball, g).inner_value))
        return worst, _ROUNDOFF, "200 draws, groups {0,1,2} (p=1) and {2,3,4} (p=inf)"

    # --- matrix ---

    def check_bilinear_slack(self) -> CheckOutcome:
        """|u'Mv - x'My| <= 2 sigma_1 delta for unit pairs moved by delta."""
        rng = self._rng(10)
        worst = -math.inf
        for _ in range(1000):
            d1, d2 = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            M = rng.standard_normal((d1, d2))
            u = rng.standard_normal(d1)
            v = rng.standard_normal(d2)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            delta = float(rng.uniform(0.0, 1.0))
            x = tangent_perturb(u, delta, rng)
            y = tangent_perturb(v, delta, rng)
            worst = max(worst, abs(float(u @ M @ v - x @ M @ y)) - bilinear_slack(M, delta))
        return worst, _ROUNDOFF, "1000 draws"

    def check_chain_accumulation(self) -> CheckOutcome:
        """Noisy linear chains deviate at most (sigma^L - 1)/(sigma - 1) eps from clean ones."""
        worst = -math.inf
        for seed in range(100):
            rng = self._rng(11, seed)
            M = rng.standard_normal((6, 6))
            M *= float(rng.uniform(0.5, 1.5)) / np.linalg.norm(M, ord=2)
            model = ErrorModel(mode=("worst_case", "uniform")[seed % 2], seed=self.seed + seed)
            comparison = noisy_linear_chain(M, rng.standard_normal(6), 10, 1e-3, model, rng=rng)
            scale = max(1.0, comparison.bound)
            worst = max(worst, (comparison.deviation - comparison.bound) / scale)
        return worst, 1e-9, "100 seeds, L=10, eps_step=1e-3"

    def check_qpm_matches_power(self) -> CheckOutcome:
        """With zero noise the power-method chain of QPM lands on the classical power-method vector."""
        rng = self._rng(12)
        model = ErrorModel(mode="exact", seed=self.seed)
        worst = 0.0
        for _ in range(20):
            M = rng.standard_normal((8, 6))
            k = 60
            quantum = qpm_emulate(M, k, 0.0, 0.0, model)
            classical = power_method_classical(M, 1.0, model, z0=np.ones(6), iterations=k)
            worst = max(worst, 1.0 - abs(float(quantum.v @ classical.v)))
        return worst, 1e-9, "20 matrices, k=60"

    def check_qtsve_precision(self) -> CheckOutcome:
        """Worst-case singular value estimation keeps u, v within delta of the top pair."""
        rng = self._rng(13)
        model = ErrorModel(mode="worst_case", seed=self.seed)
        worst = -math.inf
        for _ in range(200):
            M = rng.standard_normal((int(rng.integers(2, 9)), int(rng.integers(2, 9))))
            values = np.linalg.svd(M, compute_uv=False)
            delta = float(rng.uniform(0.01, 0.9))
            eps = (values[0] - values[1]) / 2.0 if values.size > 1 else 0.0
            triple = qtsve_emulate(M, eps, delta, model, rng=rng)
            top = exact_top_pair(M)
            for est, ref in ((triple.u, top.u), (triple.v, top.v)):
                distance = min(np.linalg.norm(est - ref), np.linalg.norm(est + ref))
                worst = max(worst, float(distance) - delta)
        return worst, 1e-9, "200 draws"

    def check_qtsve_precondition(self) -> CheckOutcome:
        """A precision above half the spectral gap is refused."""
        M = np.diag([1.0, 0.9, 0.1])
        try:
            qtsve_emulate(M, 0.06, 0.1, ErrorModel(seed=self.seed))
        except PreconditionError:
            return 0.0, 0.0, "PreconditionError raised for eps=0.06 > gap/2=0.05"
        return 1.0, 0.0, "no error raised for eps above gap/2"

    def check_qtsve_determinism(self) -> CheckOutcome:
        """Consistent-mode singular value estimation is bit-identical for the same matrix and seed."""
        rng = self._rng(17)
        mismatches = 0
        for i in range(50):
            M = rng.standard_normal((int(rng.integers(2, 9)), int(rng.integers(2, 9))))
            values = np.linalg.svd(M, compute_uv=False)
            eps = (values[0] - values[1]) / 2.0
            a, b = (qtsve_emulate(M, eps, 0.2, ErrorModel(mode="consistent", seed=self.seed + i), repetitions=2)
                    for _ in range(2))
            same = a.sigma_hat == b.sigma_hat and np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
            mismatches += not same
        return float(mismatches), 0.0, "50 matrices, two calls each"

    # --- group ---

    def check_singleton_reduction(self) -> CheckOutcome:
        """Singleton groups with p=2 reproduce the l1 quantum run step for step."""
        instance = make_least_squares_l1(8, 8, 2, 0.0, self.seed)
        model = ErrorModel(seed=self.seed)
        l1 = qfw_vector_run(instance.objective, instance.constraint_set, 0.5, 0.05, model)
        groups = [[i] for i in range(8)]
        grouped = qfw_group_run(instance.objective, groups, [2.0] * 8, 0.5, 0.05, model)
        if l1.iterations != grouped.iterations:
            return float("inf"), 0.0, f"T differs: {l1.iterations} vs {grouped.iterations}"
        diff = max(
            max(abs(a.f_value - b.f_value), abs(a.cum_function_queries - b.cum_function_queries))
            for a, b in zip(l1.records, grouped.records)
        )
        return float(diff), 0.0, f"{l1.iterations} steps compared"

    def check_two_group_convergence(self) -> CheckOutcome:
        """Quantum group run reaches eps = 0.1 on a planted two-group instance."""
        instance = make_group_instance([[0, 1, 2], [3, 4, 5]], [1.0, math.inf], self.seed)
        ball = instance.constraint_set
        trace = qfw_group_run(
            instance.objective, ball.groups, ball.p_norms, 0.1, 0.05, ErrorModel(seed=self.seed), radius=ball.radius
        )
        gap = instance.primal_gap(trace.final_value)
        return gap, instance.tolerance(0.1), f"T={trace.iterations}"

    # --- determinism ---

    def check_run_file_determinism(self) -> CheckOutcome:
        """Two runs of one config and seed write byte-identical files."""
        from qfw.experiment_pipeline import ExperimentPipeline
        from qfw.utils.run_config import RunConfig

        run_config = RunConfig(
            variant="qfw_maxfind",
            epsilon=0.5,
            problem={"kind": "least_squares_l1", "d": 16, "n_rows": 16, "sparsity": 3, "noise": 0.0, "radius": 1.0},
            seed=self.seed,
        )
        pipeline = ExperimentPipeline()
        names = ("trace.csv", "summary.json", "manifest.json")
        with tempfile.TemporaryDirectory() as tmp:
            first, second = os.path.join(tmp, "a"), os.path.join(tmp, "b")
            pipeline.run(run_config, first)
            pipeline.run(run_config, second)
            _, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
        differing = len(mismatch) + len(errors)
        return float(differing), 0.0, f"compared {', '.join(names)}"

    def summarize(self, results: List[InvariantResult]) -> str:
        """
        Summarize results as a markdown table.

        Args:
            results: Rows returned by run().

        Returns:
            str: Table of (invariant, status, measured, bound) plus a verdict line.
        """
        summary = []
        passed = sum(r["passed"] for r in results)
        summary.append(f"## Invariant check: {passed}/{len(results)} hold")
        summary.append("")
        summary.append("| invariant | status | measured | bound |")
        summary.append("|---|---|---|---|")
        for r in results:
            status = "✅ pass" if r["passed"] else "❌ FAIL"
            summary.append(f"| {r['invariant']} | {status} | {r['measured']:.6g} | {r['bound']:.6g} |")
        failures = [r for r in results if not r["passed"]]
        if failures:
            summary.append("\n### Violations:")
            for r in failures:
                summary.append(f"- 🚫 {r['invariant']}: {r['details']}")
        return "\n".join(summary)
