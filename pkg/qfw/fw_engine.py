#!/usr/bin/env python
"""
Frank-Wolfe iteration and the solver wirings built on it.

fw_run is the generic loop: step t (t = 0..T-1) calls the LMO, moves to
(1 - gamma_t) x + gamma_t s with gamma_t = 2/(t+2), and records the iterate
under index t+1. The variant functions build the LMO and its per-iteration
parameters from a Schedule and hand them to fw_run.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from config import get_solver_config
from qfw.domain import (
    ConstraintSet,
    ErrorMode,
    ErrorModel,
    L1Ball,
    LatentGroupBall,
    NuclearBall,
    QueryLedger,
    Simplex,
    SmoothObjective,
)
from qfw.errors import DegenerateInputError, InvalidArgumentError
from qfw.lmo_matrix import (
    SingularTriple,
    bilinear_slack,
    exact_top_pair,
    power_method_classical,
    qpm_emulate,
    qtsve_emulate,
)
from qfw.lmo_vector import (
    LmoResult,
    exact_lmo_group,
    exact_lmo_l1,
    exact_lmo_simplex,
    group_slack_factor,
    qlmo_group,
    qlmo_l1,
    qlmo_simplex,
)
from qfw.oracles import fd_gradient, forward_differences, jordan_error_bound, jordan_gradient_emulate

logger = logging.getLogger("fw_engine")

# (x, t, gamma_t) -> LmoResult
Lmo = Callable[[np.ndarray, int, float], LmoResult]
GradientCallback = Callable[[np.ndarray], np.ndarray]

_DIAGNOSTIC_STEP = 1e-7


@dataclass(frozen=True)
class Schedule:
    """
    Step sizes, iteration count and per-iteration solver parameters.

    Every parameter is a closed form of (t, C_f, L, d, radius) plus the
    run-time estimates passed in (sigma_1 upper bound, chain floor).
    """

    curvature: float
    smoothness: float
    dim: int
    radius: float = 1.0

    @classmethod
    def for_problem(cls, objective: SmoothObjective, constraint_set: ConstraintSet) -> "Schedule":
        return cls(
            curvature=objective.curvature,
            smoothness=objective.smoothness,
            dim=max(constraint_set.shape),
            radius=constraint_set.radius,
        )

    @staticmethod
    def gamma(t: int) -> float:
        return 2.0 / (t + 2.0)

    def iterations(self, eps: float) -> int:
        """T = ceil(4 C_f / eps) - 2, clamped to >= 1."""
        if not eps > 0:
            raise InvalidArgumentError(f"target accuracy must be positive, got {eps}")
        return max(1, int(math.ceil(4.0 * self.curvature / eps)) - 2)

    def h_bound(self, t: int) -> float:
        return 4.0 * self.curvature / (t + 2.0)

    def fd_step(self, t: int, factor: float = 1.0) -> float:
        """sigma_t = C_f / (sqrt(d) L (t+2) radius factor); 1 when the objective is affine."""
        if self.smoothness == 0 or self.curvature == 0:
            return 1.0
        return self.curvature / (math.sqrt(self.dim) * self.smoothness * (t + 2.0) * self.radius * factor)

    def jordan_radius(self, t: int, rho: float) -> float:
        """r_t, chosen so that the gradient error bound is C_f / (2 (t+2) radius)."""
        if self.smoothness == 0 or self.curvature == 0:
            return 1.0
        d = self.dim
        return rho * self.curvature / (
            16.0 * math.pi * d**2 * (d / rho + 1.0) * self.smoothness * (t + 2.0) * self.radius
        )

    @property
    def _scale(self) -> float:
        # affine objectives have C_f = 0; matrix parameters then use a unit scale
        return self.curvature if self.curvature > 0 else 1.0

    def qtsve_delta(self, t: int, sigma_upper: float) -> float:
        return min(self._scale / (2.0 * (t + 2.0) * sigma_upper * self.radius), 0.5)

    def qpm_iterations(self, sigma_upper: float, eps: float) -> int:
        c0 = get_solver_config()["power_method_c0"]
        return max(1, int(math.ceil(2.0 * c0 * sigma_upper * math.log(self.dim) / eps)))

    def qpm_precision(self, eps: float, chain_floor: float, sigma_upper: float) -> float:
        return min(eps * chain_floor / (16.0 * sigma_upper), 0.5)

    def qpm_power_precision(self, sigma_upper: float, k: int) -> float:
        """C0 sigma_up ln d / k, the sigma_1 precision k power steps reach; at most eps / 2 for k = qpm_iterations."""
        c0 = get_solver_config()["power_method_c0"]
        return c0 * sigma_upper * math.log(self.dim) / k

    def power_precision(self, t: int) -> float:
        return self._scale / ((t + 2.0) * self.radius)


@dataclass
class TraceRecord:
    """State after one Frank-Wolfe step."""

    t: int
    gamma: float
    f_value: float
    duality_gap: float
    best_gap: float
    h_bound: float
    slack: float
    slack_budget: float
    slack_ok: bool
    feasible: bool
    cum_function_queries: int
    cum_quantum_queries: int
    cum_matvecs: int
    cum_gradient_evaluations: int
    cum_time_cost: float


@dataclass
class RunTrace:
    """Records of a run plus its final iterate and ledger."""

    variant: str
    curvature: float
    records: List[TraceRecord]
    final_iterate: np.ndarray
    ledger: QueryLedger
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_value(self) -> float:
        return self.records[-1].f_value

    @property
    def final_gap(self) -> float:
        return self.records[-1].duality_gap

    def primal_gaps(self, f_star: float) -> np.ndarray:
        return np.array([r.f_value - f_star for r in self.records])

    def h_bounds(self) -> np.ndarray:
        return np.array([r.h_bound for r in self.records])

    def slack_certified(self) -> bool:
        return all(r.slack_ok for r in self.records)

    def all_feasible(self) -> bool:
        return all(r.feasible for r in self.records)

    def relaxed_bounds(self) -> np.ndarray:
        """2 C_f (1 + delta) / (t + 2), delta being the largest slack relative to gamma_t C_f / 2."""
        if self.curvature == 0:
            return np.zeros(len(self.records))
        delta = max(r.slack / (r.gamma * self.curvature / 2.0) for r in self.records)
        return np.array([2.0 * self.curvature * (1.0 + delta) / (r.t + 2.0) for r in self.records])

    def per_round(self, counter: str) -> np.ndarray:
        """Per-iteration amount of one ledger counter (setup charges excluded)."""
        return np.array([getattr(e, counter) for e in self.ledger.entries[1:]], dtype=np.float64)


# --- Certificates ---


def exact_lmo(constraint_set: ConstraintSet, grad: Any) -> LmoResult:
    """Exact LMO dispatched on the type of the constraint set."""
    if isinstance(constraint_set, L1Ball):
        return exact_lmo_l1(grad, constraint_set.radius)
    if isinstance(constraint_set, Simplex):
        return exact_lmo_simplex(grad)
    if isinstance(constraint_set, LatentGroupBall):
        return exact_lmo_group(grad, constraint_set.groups, constraint_set.p_norms, constraint_set.radius)
    if isinstance(constraint_set, NuclearBall):
        grad = np.asarray(grad, dtype=np.float64)
        pair = exact_top_pair(grad)
        s = -constraint_set.radius * np.outer(pair.u, pair.v)
        return LmoResult(s=s, inner_value=float(np.sum(s * grad)))
    raise InvalidArgumentError(f"no exact LMO for {type(constraint_set).__name__}")


def duality_gap(x: Any, grad: Any, constraint_set: ConstraintSet) -> float:
    """max over s in the set of <x - s, grad>."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise InvalidArgumentError("duality gap needs a finite gradient")
    s = exact_lmo(constraint_set, grad).s
    return float(np.sum((np.asarray(x, dtype=np.float64) - s) * grad))


def diagnostic_gradient(objective: SmoothObjective, x: np.ndarray) -> np.ndarray:
    """Gradient used for trace certificates; never charged."""
    if objective.has_gradient:
        return objective.gradient(x)
    return forward_differences(objective, x, _DIAGNOSTIC_STEP)


# --- Generic loop ---


def fw_run(
    objective: SmoothObjective,
    constraint_set: ConstraintSet,
    lmo: Lmo,
    schedule: Schedule,
    x1: Any,
    T: int,
    ledger: Optional[QueryLedger] = None,
    variant: str = "fw",
    gradient_fn: Optional[GradientCallback] = None,
) -> RunTrace:
    """
    Run T Frank-Wolfe steps from x1.

    Args:
        objective: Objective (diagnostics use it uncharged).
        constraint_set: Feasible region; x1 must lie in it.
        lmo: Callable (x, t, gamma_t) -> LmoResult.
        schedule: Supplies gamma_t, C_f and the h bound.
        x1: Starting point.
        T: Number of steps (>= 1).
        ledger: Ledger the LMO charges; a fresh one is created when omitted.
        variant: Name recorded in the trace.
        gradient_fn: Gradient used for diagnostics when the objective has none.

    Returns:
        RunTrace: One record per step.
    """
    if int(T) < 1:
        raise InvalidArgumentError(f"iteration count must be >= 1, got {T}")
    x = np.array(x1, dtype=np.float64)
    if x.shape != constraint_set.shape or not constraint_set.contains(x):
        raise InvalidArgumentError("starting point is not in the constraint set")
    ledger = ledger if ledger is not None else QueryLedger()
    diagnose = gradient_fn if gradient_fn is not None else (lambda point: diagnostic_gradient(objective, point))

    logger.info(f"Starting {variant}: T={T}, C_f={schedule.curvature:.6g}, dim={schedule.dim}")
    records: List[TraceRecord] = []
    best_gap = math.inf
    # x_t is a convex combination of x1 and the returned atoms
    feasible = True
    for step in range(int(T)):
        t = step + 1
        ledger.begin_iteration(t)
        gamma = schedule.gamma(step)
        result = lmo(x, step, gamma)
        x = (1.0 - gamma) * x + gamma * result.s
        atom_ok = constraint_set.contains(result.s)
        if feasible and not atom_ok:
            logger.warning(f"{variant} t={t}: LMO returned a point outside the constraint set")
        feasible = feasible and atom_ok

        f_value = objective.value(x)
        gap = duality_gap(x, diagnose(x), constraint_set)
        best_gap = min(best_gap, gap)
        slack = float(result.additive_slack_bound)
        budget = gamma * schedule.curvature / 2.0 if result.slack_budget is None else float(result.slack_budget)
        totals = ledger.totals()
        records.append(
            TraceRecord(
                t=t,
                gamma=gamma,
                f_value=f_value,
                duality_gap=gap,
                best_gap=best_gap,
                h_bound=schedule.h_bound(t),
                slack=slack,
                slack_budget=budget,
                slack_ok=slack <= budget * (1.0 + 1e-9),
                feasible=feasible,
                cum_function_queries=int(totals.function_queries),
                cum_quantum_queries=int(totals.quantum_queries),
                cum_matvecs=int(totals.matvecs),
                cum_gradient_evaluations=int(totals.gradient_evaluations),
                cum_time_cost=float(totals.time_cost),
            )
        )
        logger.debug(f"{variant} t={t} f={f_value:.6g} gap={gap:.6g} slack={slack:.3g}")

    logger.info(f"Finished {variant}: f={records[-1].f_value:.6g}, gap={records[-1].duality_gap:.6g}")
    return RunTrace(
        variant=variant,
        curvature=schedule.curvature,
        records=records,
        final_iterate=x,
        ledger=ledger,
    )


def _check_failure(p_fail: float) -> None:
    if not 0 < p_fail < 1:
        raise InvalidArgumentError(f"failure probability must be in (0, 1), got {p_fail}")


def _start(constraint_set: ConstraintSet, x1: Optional[Any]) -> np.ndarray:
    return constraint_set.initial_point() if x1 is None else np.asarray(x1, dtype=np.float64)


# --- Vector variants ---


def exact_fw_run(
    objective: SmoothObjective,
    constraint_set: ConstraintSet,
    T: int,
    x1: Optional[Any] = None,
    gradient_fn: Optional[GradientCallback] = None,
) -> RunTrace:
    """Frank-Wolfe with the exact gradient and the exact LMO (reference runs)."""
    gradient = gradient_fn if gradient_fn is not None else objective.gradient
    schedule = Schedule.for_problem(objective, constraint_set)
    ledger = QueryLedger()

    def lmo(x: np.ndarray, t: int, gamma: float) -> LmoResult:
        ledger.charge_gradient_evaluations(1)
        return exact_lmo(constraint_set, gradient(x))

    return fw_run(
        objective, constraint_set, lmo, schedule, _start(constraint_set, x1), T,
        ledger=ledger, variant="exact_fw", gradient_fn=gradient_fn,
    )


def classical_fw_run(
    objective: SmoothObjective,
    constraint_set: ConstraintSet,
    eps: float,
    x1: Optional[Any] = None,
) -> RunTrace:
    """
    Classical baseline: forward-difference gradient (d+1 queries) and the exact LMO.

    Works on the l1 ball, the simplex and latent group balls, with the same
    sigma_t schedule as the quantum variants.
    """
    schedule = Schedule.for_problem(objective, constraint_set)
    T = schedule.iterations(eps)
    factor = 1.0
    if isinstance(constraint_set, LatentGroupBall):
        factor = group_slack_factor(constraint_set.groups, constraint_set.p_norms)
    ledger = QueryLedger()

    def lmo(x: np.ndarray, t: int, gamma: float) -> LmoResult:
        sigma = schedule.fd_step(t, factor)
        estimate = fd_gradient(objective, x, sigma, ledger=ledger)
        result = exact_lmo(constraint_set, estimate.g)
        slack = schedule.radius * math.sqrt(schedule.dim) * objective.smoothness * sigma * factor
        return replace(result, additive_slack_bound=slack, charged_queries=estimate.charged_queries)

    variant = "classical_group" if isinstance(constraint_set, LatentGroupBall) else "classical_fw"
    trace = fw_run(
        objective, constraint_set, lmo, schedule, _start(constraint_set, x1), T,
        ledger=ledger, variant=variant,
    )
    trace.parameters.update({"epsilon": eps, "T": T})
    return trace


def qfw_vector_run(
    objective: SmoothObjective,
    constraint_set: ConstraintSet,
    eps: float,
    p_fail: float,
    model: ErrorModel,
    x1: Optional[Any] = None,
) -> RunTrace:
    """
    Quantum Frank-Wolfe over the l1 ball or the simplex.

    Each round runs emulated maximum finding over forward differences with
    step sigma_t and failure budget p_fail / T.
    """
    _check_failure(p_fail)
    if not isinstance(constraint_set, (L1Ball, Simplex)):
        raise InvalidArgumentError("qfw_vector_run supports L1Ball and Simplex")
    schedule = Schedule.for_problem(objective, constraint_set)
    T = schedule.iterations(eps)
    delta_fail = p_fail / T
    rng = model.generator("fw-run")
    ledger = QueryLedger()

    def lmo(x: np.ndarray, t: int, gamma: float) -> LmoResult:
        sigma = schedule.fd_step(t)
        if isinstance(constraint_set, L1Ball):
            return qlmo_l1(objective, x, sigma, constraint_set.radius, delta_fail, model, rng=rng, ledger=ledger)
        return qlmo_simplex(objective, x, sigma, delta_fail, model, rng=rng, ledger=ledger)

    trace = fw_run(
        objective, constraint_set, lmo, schedule, _start(constraint_set, x1), T,
        ledger=ledger, variant="qfw_maxfind",
    )
    trace.parameters.update({"epsilon": eps, "p_fail": p_fail, "delta_fail": delta_fail, "T": T})
    return trace


def qfw_jordan_run(
    objective: SmoothObjective,
    constraint_set: ConstraintSet,
    eps: float,
    rho: float,
    model: ErrorModel,
    x1: Optional[Any] = None,
) -> RunTrace:
    """
    Quantum Frank-Wolfe with the one-query gradient routine.

    Each round charges one quantum query, scans the estimate classically and
    takes the sign-corrected vertex. The radius r_t keeps the per-coordinate
    error at C_f / (2 (t+2) radius), so the additive slack is C_f / (t+2).
    """
    if not 0 < rho <= 1:
        raise InvalidArgumentError(f"failure probability must be in (0, 1], got {rho}")
    if not isinstance(constraint_set, (L1Ball, Simplex)):
        raise InvalidArgumentError("qfw_jordan_run supports L1Ball and Simplex")
    schedule = Schedule.for_problem(objective, constraint_set)
    T = schedule.iterations(eps)
    rng = model.generator("fw-run")
    ledger = QueryLedger()

    def lmo(x: np.ndarray, t: int, gamma: float) -> LmoResult:
        r = schedule.jordan_radius(t, rho)
        estimate = jordan_gradient_emulate(objective, x, r, rho, model, rng=rng, ledger=ledger)
        result = exact_lmo(constraint_set, estimate.g)
        slack = 2.0 * schedule.radius * jordan_error_bound(x.size, objective.smoothness, r, rho)
        return replace(result, additive_slack_bound=slack, charged_queries=1)

    trace = fw_run(
        objective, constraint_set, lmo, schedule, _start(constraint_set, x1), T,
        ledger=ledger, variant="qfw_jordan",
    )
    trace.parameters.update({"epsilon": eps, "rho": rho, "T": T})
    return trace


def qfw_group_run(
    objective: SmoothObjective,
    groups: Sequence[Sequence[int]],
    p_norms: Sequence[float],
    eps: float,
    p_fail: float,
    model: ErrorModel,
    radius: float = 1.0,
    x1: Optional[Any] = None,
) -> RunTrace:
    """Quantum Frank-Wolfe over the latent group norm ball."""
    _check_failure(p_fail)
    ball = LatentGroupBall(groups=groups, p_norms=p_norms, radius=radius)
    schedule = Schedule.for_problem(objective, ball)
    factor = group_slack_factor(ball.groups, ball.p_norms)
    T = schedule.iterations(eps)
    delta_fail = p_fail / T
    rng = model.generator("fw-run")
    ledger = QueryLedger()

    def lmo(x: np.ndarray, t: int, gamma: float) -> LmoResult:
        return qlmo_group(
            objective, x, schedule.fd_step(t, factor), delta_fail, ball.groups, ball.p_norms, model,
            radius=ball.radius, rng=rng, ledger=ledger,
        )

    trace = fw_run(objective, ball, lmo, schedule, _start(ball, x1), T, ledger=ledger, variant="qfw_group")
    trace.parameters.update({"epsilon": eps, "p_fail": p_fail, "delta_fail": delta_fail, "T": T})
    return trace


# --- Matrix variants ---


def _spectral_gap(values: np.ndarray) -> tuple:
    """(sigma_1, sigma_1 - sigma_2) from descending singular values."""
    sigma1 = float(values[0])
    sigma2 = float(values[1]) if values.size > 1 else 0.0
    gap = sigma1 - sigma2
    if sigma1 <= 0 or gap < get_solver_config()["gap_tol"] * sigma1:
        raise DegenerateInputError(f"spectral gap vanished (sigma_1={sigma1:.6g}, sigma_2={sigma2:.6g})")
    return sigma1, gap


def sigma_upper_estimate(M: np.ndarray, model: ErrorModel, ledger: Optional[QueryLedger] = None) -> float:
    """
    Upper estimate of sigma_1 from a coarse power-method pass.

    The pass runs at precision eps' = coarse_relative_precision * ||M||_F and
    returns sigma_hat + eps'. Only its matvecs are charged.
    """
    eps_prime = get_solver_config()["coarse_relative_precision"] * float(np.linalg.norm(M))
    if eps_prime == 0:
        raise DegenerateInputError("gradient matrix is zero")
    coarse = power_method_classical(M, eps_prime, ErrorModel(ErrorMode.EXACT, model.seed))
    if ledger is not None:
        ledger.charge_matvecs(coarse.matvecs)
    return coarse.sigma_hat + eps_prime


def _rank_one_atom(
    triple: SingularTriple, radius: float, M: np.ndarray, slack: float, budget: Optional[float] = None
) -> LmoResult:
    s = -radius * np.outer(triple.u, triple.v)
    return LmoResult(s=s, inner_value=float(np.sum(s * M)), additive_slack_bound=slack, slack_budget=budget)


def _matrix_run(
    variant: str,
    gradient_callback: GradientCallback,
    objective: SmoothObjective,
    ball: NuclearBall,
    eps: float,
    direction: Callable[[np.ndarray, int, Schedule, QueryLedger], LmoResult],
    x1: Optional[Any],
) -> RunTrace:
    if not isinstance(ball, NuclearBall):
        raise InvalidArgumentError(f"{variant} needs a NuclearBall")
    schedule = Schedule.for_problem(objective, ball)
    T = schedule.iterations(eps)
    ledger = QueryLedger()

    def lmo(X: np.ndarray, t: int, gamma: float) -> LmoResult:
        M = np.asarray(gradient_callback(X), dtype=np.float64)
        ledger.charge_gradient_evaluations(1)
        return direction(M, t, schedule, ledger)

    trace = fw_run(
        objective, ball, lmo, schedule, _start(ball, x1), T,
        ledger=ledger, variant=variant, gradient_fn=gradient_callback,
    )
    trace.parameters.update({"epsilon": eps, "T": T})
    return trace


def matrix_exact_run(
    gradient_callback: GradientCallback,
    objective: SmoothObjective,
    ball: NuclearBall,
    eps: float,
    x1: Optional[Any] = None,
) -> RunTrace:
    """Nuclear-norm Frank-Wolfe with the exact top singular pair."""
    def direction(M: np.ndarray, t: int, schedule: Schedule, ledger: QueryLedger) -> LmoResult:
        return _rank_one_atom(exact_top_pair(M), ball.radius, M, 0.0)

    return _matrix_run("matrix_exact", gradient_callback, objective, ball, eps, direction, x1)


def matrix_power_run(
    gradient_callback: GradientCallback,
    objective: SmoothObjective,
    ball: NuclearBall,
    eps: float,
    model: ErrorModel,
    x1: Optional[Any] = None,
) -> RunTrace:
    """Classical baseline: power method at precision eps'_t = C_f / ((t+2) radius)."""
    def direction(M: np.ndarray, t: int, schedule: Schedule, ledger: QueryLedger) -> LmoResult:
        eps_prime = schedule.power_precision(t)
        triple = power_method_classical(M, eps_prime, model, ledger=ledger)
        return _rank_one_atom(triple, ball.radius, M, ball.radius * eps_prime)

    return _matrix_run("matrix_power", gradient_callback, objective, ball, eps, direction, x1)


def qfw_matrix_qtsve_run(
    gradient_callback: GradientCallback,
    objective: SmoothObjective,
    ball: NuclearBall,
    eps: float,
    model: ErrorModel,
    repetitions: int = 1,
    x1: Optional[Any] = None,
) -> RunTrace:
    """
    Nuclear-norm quantum Frank-Wolfe with emulated singular value estimation.

    Per round: eps_t = (sigma_1 - sigma_2)/2 and delta_t from the sigma_1 upper
    estimate; the charged time is the estimation cost at (eps_t, delta_t).
    """
    rng = model.generator("fw-run")

    def direction(M: np.ndarray, t: int, schedule: Schedule, ledger: QueryLedger) -> LmoResult:
        svd = np.linalg.svd(M)
        _, gap = _spectral_gap(svd[1])
        sigma_upper = sigma_upper_estimate(M, model, ledger)
        delta = schedule.qtsve_delta(t, sigma_upper)
        triple = qtsve_emulate(
            M, gap / 2.0, delta, model, repetitions=repetitions, rng=rng, ledger=ledger, svd=svd
        )
        return _rank_one_atom(triple, ball.radius, M, ball.radius * bilinear_slack(M, delta))

    return _matrix_run("matrix_qtsve", gradient_callback, objective, ball, eps, direction, x1)


def qfw_matrix_qpm_run(
    gradient_callback: GradientCallback,
    objective: SmoothObjective,
    ball: NuclearBall,
    eps: float,
    model: ErrorModel,
    x1: Optional[Any] = None,
) -> RunTrace:
    """
    Nuclear-norm quantum Frank-Wolfe with the emulated quantum power method.

    Per round: k_t = ceil(2 C0 sigma_up ln d / eps); an uncharged noiseless pass
    measures the chain floor, which sets delta_t = delta'_t. The per-round slack
    (power precision plus the bilinear term of the tomography error) is
    certified against the constant budget radius * eps, not gamma_t C_f / 2.
    """
    rng = model.generator("fw-run")
    clean_model = ErrorModel(ErrorMode.EXACT, model.seed)

    def direction(M: np.ndarray, t: int, schedule: Schedule, ledger: QueryLedger) -> LmoResult:
        _spectral_gap(np.linalg.svd(M, compute_uv=False))
        sigma_upper = sigma_upper_estimate(M, model, ledger)
        k = schedule.qpm_iterations(sigma_upper, eps)
        floor = qpm_emulate(M, k, 0.0, 0.0, clean_model).chain_floor
        delta = schedule.qpm_precision(eps, floor, sigma_upper)
        triple = qpm_emulate(M, k, delta, delta, model, rng=rng, ledger=ledger)
        slack = schedule.qpm_power_precision(sigma_upper, k) + bilinear_slack(M, triple.vector_precision)
        return _rank_one_atom(triple, ball.radius, M, ball.radius * slack, budget=ball.radius * eps)

    return _matrix_run("matrix_qpm", gradient_callback, objective, ball, eps, direction, x1)
