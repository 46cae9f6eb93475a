#!/usr/bin/env python
"""
Top singular pair extraction for the nuclear-norm LMO.

Four routines share the SingularTriple result: the exact SVD reference, the
classical power method, and emulations of quantum singular value estimation
(QTSVE) and of the quantum power method (QPM). The emulators compute the exact
answer, degrade it inside the precision their guarantees allow, and charge the
abstract time those guarantees cost.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from config import get_solver_config
from qfw.domain import ErrorMode, ErrorModel, Matrix, QueryLedger, Vector, as_matrix, as_vector, fingerprint
from qfw.errors import DegenerateInputError, InvalidArgumentError, PreconditionError

logger = logging.getLogger("lmo_matrix")

_WARM_UP_ITERATIONS = 8

# singular values of two LAPACK calls on one matrix may differ by a few ulps of sigma_1
_SVD_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class SingularTriple:
    """Estimated top singular value and unit singular vectors."""

    sigma_hat: float
    u: Vector
    v: Vector
    charged_cost: float = 0.0
    sigma_precision: float = 0.0
    vector_precision: float = 0.0
    matvecs: int = 0
    chain_floor: Optional[float] = None

    def __post_init__(self) -> None:
        if self.sigma_hat < 0:
            raise InvalidArgumentError(f"sigma_hat must be nonnegative, got {self.sigma_hat}")
        for name in ("u", "v"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-9:
                raise InvalidArgumentError(f"{name} is not a unit vector")


@dataclass(frozen=True)
class MatvecStep:
    """Result of one noisy normalized matrix-vector product."""

    vector: Vector
    gamma: float
    charged_cost: float


@dataclass(frozen=True)
class ChainComparison:
    """Clean and noisy unnormalized power chains run side by side."""

    clean: Vector
    noisy: Vector
    deviation: float
    bound: float


def polylog(d: int) -> float:
    """ln(d) ** exponent with the logarithm floored at 1."""
    return max(math.log(d), 1.0) ** get_solver_config()["polylog_exponent"]


def _log_factor(value: float) -> float:
    return max(math.log(value), 1.0)


def sign_convention(u: Vector, v: Vector) -> Tuple[Vector, Vector]:
    """Flip the pair so that the first entry of u above 1e-12 in magnitude is positive."""
    nonzero = np.flatnonzero(np.abs(u) > 1e-12)
    if nonzero.size and u[nonzero[0]] < 0:
        return -u, -v
    return u, v


def bilinear_slack(M: Any, delta: float) -> float:
    """Bound 2 sigma_1(M) delta on |u'Mv - x'My| when x, y are within delta of u, v."""
    sigma1 = float(np.linalg.norm(as_matrix(M), ord=2))
    return 2.0 * sigma1 * delta


def tangent_perturb(x: Vector, chord: float, rng: np.random.Generator) -> Vector:
    """
    Rotate unit x toward a random orthogonal direction by exactly `chord` in l2 distance.

    The result is renormalized, so it stays on the unit sphere.
    """
    if chord <= 0:
        return x.copy()
    w = rng.standard_normal(x.size)
    w -= (w @ x) * x
    norm = np.linalg.norm(w)
    if norm < 1e-15:
        return x.copy()
    theta = 2.0 * math.asin(min(chord, 2.0) / 2.0)
    y = math.cos(theta) * x + math.sin(theta) * (w / norm)
    return y / np.linalg.norm(y)


def _chord(model: ErrorModel, bound: float, rng: np.random.Generator) -> float:
    if model.is_exact or bound <= 0:
        return 0.0
    if model.mode is ErrorMode.WORST_CASE:
        return bound
    return bound * rng.random()


# --- Exact and classical ---


def exact_top_pair(M: Any) -> SingularTriple:
    """Full SVD reference: (sigma_1, u_1, v_1) under the sign convention."""
    M = as_matrix(M, "M")
    U, S, Vt = np.linalg.svd(M)
    u, v = sign_convention(U[:, 0].copy(), Vt[0].copy())
    return SingularTriple(sigma_hat=float(S[0]), u=u, v=v)


def power_method_classical(
    M: Any,
    eps_prime: float,
    model: ErrorModel,
    z0: Optional[Vector] = None,
    iterations: Optional[int] = None,
    ledger: Optional[QueryLedger] = None,
) -> SingularTriple:
    """
    Classical power method on M^T M.

    Without an explicit iteration count, an 8-iteration warm-up estimates
    sigma_1 and the run uses k = ceil(C0 sigma_est ln d / eps'). Every iteration,
    warm-up included, costs two matvecs and d1 * d2 time units.

    Args:
        M: Matrix.
        eps_prime: Target precision on sigma_1 (> 0).
        model: Error model; seeds the random start vector.
        z0: Optional start vector (normalized internally).
        iterations: Optional fixed iteration count.
        ledger: Charged with matvecs and time.

    Returns:
        SingularTriple: Rayleigh estimate and the singular vectors.
    """
    if not eps_prime > 0:
        raise InvalidArgumentError(f"power method precision must be positive, got {eps_prime}")
    M = as_matrix(M, "M")
    d1, d2 = M.shape
    d = max(d1, d2)

    if np.linalg.norm(M) == 0:
        u = np.zeros(d1)
        v = np.zeros(d2)
        u[0] = v[0] = 1.0
        return SingularTriple(sigma_hat=0.0, u=u, v=v, sigma_precision=eps_prime)

    if z0 is None:
        z = model.generator("power-method", fingerprint(M)).standard_normal(d2)
    else:
        z = as_vector(z0, "z0").copy()
    z /= np.linalg.norm(z)

    warm_up = 0
    if iterations is None:
        warm = z.copy()
        for _ in range(_WARM_UP_ITERATIONS):
            w = M.T @ (M @ warm)
            warm_up += 1
            norm = np.linalg.norm(w)
            if norm == 0:
                break
            warm = w / norm
        sigma_est = float(np.linalg.norm(M @ warm))
        c0 = get_solver_config()["power_method_c0"]
        k = max(1, int(math.ceil(c0 * sigma_est * math.log(d) / eps_prime)))
    else:
        k = int(iterations)
        if k < 1:
            raise InvalidArgumentError(f"iteration count must be >= 1, got {iterations}")

    for _ in range(k):
        w = M.T @ (M @ z)
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        z = w / norm

    Mv = M @ z
    sigma = float(np.linalg.norm(Mv))
    if sigma > 0:
        u = Mv / sigma
    else:
        u = np.zeros(d1)
        u[0] = 1.0
    u, v = sign_convention(u, z)
    # warm-up iterations are charged like the main ones
    charged = k + warm_up
    cost = float(charged * d1 * d2)
    if ledger is not None:
        ledger.charge_matvecs(2 * charged)
        ledger.charge_time(cost)
    logger.debug(f"Power method ran {warm_up} warm-up and {k} iterations, sigma_hat={sigma:.6g}")
    return SingularTriple(
        sigma_hat=sigma, u=u, v=v, charged_cost=cost, sigma_precision=eps_prime, matvecs=2 * charged
    )


# --- Quantum singular value estimation ---


def qtsve_cost(frobenius: float, d: int, p: float, eps: float, delta: float) -> float:
    """Abstract time ||M||_F d polylog(d) / (sqrt(p) eps delta^2) of one QTSVE call."""
    floor = get_solver_config()["cost_floor"]
    return frobenius * d * polylog(d) / (math.sqrt(p) * max(eps, floor) * max(delta, floor) ** 2)


def qtsve_emulate(
    M: Any,
    eps: float,
    delta: float,
    model: ErrorModel,
    repetitions: int = 1,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
    svd: Optional[Tuple[Matrix, Vector, Matrix]] = None,
) -> SingularTriple:
    """
    Emulated quantum top singular vector extraction.

    Singular values are shifted inside [-eps, eps] (seed-deterministic per matrix
    in consistent mode), the top one is selected, and its singular vectors are
    moved by at most delta on the unit sphere to stand in for tomography.
    Several repetitions keep the candidate pair with the largest u'Mv.

    Args:
        M: Matrix (the gradient).
        eps: Singular value precision; must not exceed half the spectral gap.
        delta: Vector precision in (0, 1).
        model: Error model.
        repetitions: Amplification repetitions (>= 1); each one is charged.
        rng: Run-level generator; derived from the model and M when omitted.
        ledger: Charged with the abstract time.
        svd: Precomputed (U, S, Vt) of M, as returned by np.linalg.svd; computed when omitted.

    Returns:
        SingularTriple: Estimate with guarantee (eps, delta).
    """
    if not eps >= 0:
        raise InvalidArgumentError(f"singular value precision must be nonnegative, got {eps}")
    if not 0 < delta < 1:
        raise InvalidArgumentError(f"vector precision must be in (0, 1), got {delta}")
    if int(repetitions) < 1:
        raise InvalidArgumentError(f"repetitions must be >= 1, got {repetitions}")
    M = as_matrix(M, "M")
    U, S, Vt = svd if svd is not None else np.linalg.svd(M)
    if S[0] == 0:
        raise DegenerateInputError("singular value estimation of the zero matrix")
    sigma2 = float(S[1]) if S.size > 1 else 0.0
    gap = float(S[0]) - sigma2
    if eps > gap / 2.0 + _SVD_ROUNDOFF * float(S[0]):
        raise PreconditionError(f"precision {eps:.6g} exceeds half the spectral gap {gap:.6g}")

    key = fingerprint(M)
    rng = rng if rng is not None else model.generator("qtsve", key)
    if model.is_exact or eps == 0:
        offsets = np.zeros(S.size)
    elif model.mode is ErrorMode.WORST_CASE:
        offsets = np.full(S.size, eps)
        offsets[0] = -eps
    elif model.mode is ErrorMode.UNIFORM:
        offsets = rng.uniform(-eps, eps, size=S.size)
    else:
        offsets = eps * model.consistent_offsets(("qtsve", key), S.size)
    perturbed = S + offsets
    # tolerant argmax: values tied at the precision boundary resolve to the lowest index
    ceiling = perturbed.max()
    top = int(np.flatnonzero(perturbed >= ceiling - 1e-12 * max(1.0, abs(ceiling)))[0])
    sigma_hat = max(float(perturbed[top]), 0.0)

    best_u, best_v, best_score = None, None, -math.inf
    for _ in range(int(repetitions)):
        chord = _chord(model, delta, rng)
        u = tangent_perturb(U[:, top], chord, rng)
        v = tangent_perturb(Vt[top], chord, rng)
        score = float(u @ M @ v)
        if score > best_score:
            best_u, best_v, best_score = u, v, score
    u, v = sign_convention(best_u, best_v)

    p = float(S[0] ** 2 / np.sum(S**2))
    cost = qtsve_cost(float(np.linalg.norm(M)), max(M.shape), p, eps, delta) * int(repetitions)
    if ledger is not None:
        ledger.charge_time(cost)
    return SingularTriple(
        sigma_hat=sigma_hat, u=u, v=v, charged_cost=cost, sigma_precision=float(eps), vector_precision=float(delta)
    )


# --- Quantum power method ---


def noisy_unit_matvec(
    M: Any,
    z: Any,
    eps_step: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> MatvecStep:
    """
    Normalized product Mz/||Mz|| moved by at most eps_step on the unit sphere.

    Charges ||M||_F ln(1/eps_step) / ||Mz|| time units and one matvec.
    """
    if not eps_step >= 0:
        raise InvalidArgumentError(f"step precision must be nonnegative, got {eps_step}")
    M = as_matrix(M, "M")
    z = as_vector(z, "z")
    if abs(np.linalg.norm(z) - 1.0) > 1e-9:
        raise InvalidArgumentError("noisy matvec expects a unit input vector")
    config = get_solver_config()
    w = M @ z
    gamma = float(np.linalg.norm(w))
    if gamma < config["chain_collapse_tol"]:
        raise DegenerateInputError(f"matrix-vector chain collapsed (||Mz|| = {gamma:.3g})")
    rng = rng if rng is not None else model.generator("matvec", fingerprint(M, z))
    y = tangent_perturb(w / gamma, _chord(model, eps_step, rng), rng)
    cost = float(np.linalg.norm(M)) * _log_factor(1.0 / max(eps_step, config["cost_floor"])) / gamma
    if ledger is not None:
        ledger.charge_matvecs(1)
        ledger.charge_time(cost)
    return MatvecStep(vector=y, gamma=gamma, charged_cost=cost)


def chain_error_bound(sigma_max: float, length: int, eps_step: float) -> float:
    """Accumulated error (sigma^L - 1)/(sigma - 1) * eps of a noisy linear chain."""
    if math.isclose(sigma_max, 1.0):
        return length * eps_step
    return (sigma_max**length - 1.0) / (sigma_max - 1.0) * eps_step


def noisy_linear_chain(
    M: Any,
    z0: Any,
    length: int,
    eps_step: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
) -> ChainComparison:
    """
    Unnormalized chains z <- Mz with and without a per-step error of norm <= eps_step.

    The deviation of the final vectors is reported with its geometric-sum bound.
    """
    M = as_matrix(M, "M")
    clean = as_vector(z0, "z0").copy()
    noisy = clean.copy()
    rng = rng if rng is not None else model.generator("linear-chain", fingerprint(M))
    for _ in range(int(length)):
        clean = M @ clean
        noisy = M @ noisy
        magnitude = _chord(model, eps_step, rng)
        if magnitude > 0:
            direction = rng.standard_normal(noisy.size)
            noisy = noisy + magnitude * direction / np.linalg.norm(direction)
    sigma_max = float(np.linalg.norm(M, ord=2))
    return ChainComparison(
        clean=clean,
        noisy=noisy,
        deviation=float(np.linalg.norm(noisy - clean)),
        bound=chain_error_bound(sigma_max, int(length), eps_step),
    )


def qpm_chain_cost(
    k: int,
    frobenius: float,
    sigma_scaled: float,
    chain_floor: float,
    d: int,
    delta: float,
    delta_prime: float,
) -> float:
    """Time of one chain: k noisy matvecs repeated for each tomography sample."""
    floor = get_solver_config()["cost_floor"]
    chain = k * frobenius * _log_factor(1.0 / max(delta, floor)) / ((1.0 - sigma_scaled) * chain_floor)
    tomography = d * _log_factor(d) / max(delta_prime, floor) ** 2
    return chain * tomography


def _run_chain(
    A: Matrix, k: int, eps_step: float, model: ErrorModel, rng: np.random.Generator
) -> Tuple[Vector, float]:
    z = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    chain_floor = math.inf
    for _ in range(k):
        step = noisy_unit_matvec(A, z, eps_step, model, rng=rng)
        chain_floor = min(chain_floor, step.gamma)
        z = step.vector
    return z, chain_floor


def qpm_emulate(
    M: Any,
    k: int,
    delta: float,
    delta_prime: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> SingularTriple:
    """
    Emulated quantum power method.

    M is rescaled to sigma_1 = qpm_scaled_sigma. The right chain iterates
    Ms^T Ms and the left chain Ms Ms^T, both from the normalized all-ones
    vector, with per-step error chosen so that the accumulated chain error
    stays within delta. Tomography then moves each result by at most
    delta_prime. The reported value is the Rayleigh quotient u'Mv on the
    original scale, and chain_floor is the smallest ||A z|| seen on either
    chain.

    Args:
        M: Matrix (the gradient).
        k: Chain length (>= 1).
        delta: Accumulated chain error budget in [0, 1).
        delta_prime: Tomography precision in [0, 1).
        model: Error model.
        rng: Run-level generator; derived from the model and M when omitted.
        ledger: Charged with 2k matvecs and the abstract time of both chains.

    Returns:
        SingularTriple: Estimate whose u comes from the left chain and v from the right.
    """
    if int(k) < 1:
        raise InvalidArgumentError(f"chain length must be >= 1, got {k}")
    for name, value in (("delta", delta), ("delta_prime", delta_prime)):
        if not 0 <= value < 1:
            raise InvalidArgumentError(f"{name} must be in [0, 1), got {value}")
    M = as_matrix(M, "M")
    k = int(k)
    sigma1 = float(np.linalg.norm(M, ord=2))
    if sigma1 == 0:
        raise DegenerateInputError("power method on the zero matrix")
    scaled_sigma = get_solver_config()["qpm_scaled_sigma"]
    Ms = M * (scaled_sigma / sigma1)
    contraction = scaled_sigma**2
    eps_step = delta * (1.0 - contraction) / (1.0 - contraction**k)

    rng = rng if rng is not None else model.generator("qpm", fingerprint(M))
    v, right_floor = _run_chain(Ms.T @ Ms, k, eps_step, model, rng)
    u, left_floor = _run_chain(Ms @ Ms.T, k, eps_step, model, rng)
    v = tangent_perturb(v, _chord(model, delta_prime, rng), rng)
    u = tangent_perturb(u, _chord(model, delta_prime, rng), rng)
    if u @ M @ v < 0:
        u = -u
    u, v = sign_convention(u, v)
    sigma_hat = max(float(u @ M @ v) / float(np.linalg.norm(u) * np.linalg.norm(v)), 0.0)

    frobenius = float(np.linalg.norm(Ms))
    cost = qpm_chain_cost(k, frobenius, scaled_sigma, right_floor, M.shape[1], delta, delta_prime)
    cost += qpm_chain_cost(k, frobenius, scaled_sigma, left_floor, M.shape[0], delta, delta_prime)
    if ledger is not None:
        ledger.charge_matvecs(2 * k)
        ledger.charge_time(cost)
    return SingularTriple(
        sigma_hat=sigma_hat,
        u=u,
        v=v,
        charged_cost=cost,
        sigma_precision=float(delta + delta_prime) * sigma1,
        vector_precision=float(delta + delta_prime),
        matvecs=2 * k,
        chain_floor=min(right_floor, left_floor),
    )
