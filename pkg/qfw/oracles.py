#!/usr/bin/env python
"""
Gradient estimators built on the function-value oracle.

Forward differences are computed for real. The one-query quantum gradient
routine is emulated through its error contract: the output is the exact
gradient perturbed inside the guaranteed l-infinity bound, except with
probability rho where a visible outlier is returned instead.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from config import get_solver_config
from qfw.domain import (
    ErrorMode,
    ErrorModel,
    QueryLedger,
    SmoothObjective,
    Vector,
    as_vector,
    fingerprint,
)
from qfw.errors import InvalidArgumentError

logger = logging.getLogger("oracles")

INJECTION_TARGETS = ("abs", "max", "min")


@dataclass(frozen=True)
class GradientEstimate:
    """An estimated gradient with the guarantee it was produced under."""

    g: Vector
    charged_queries: int
    l2_bound: Optional[float] = None
    linf_bound: Optional[float] = None
    failure_prob: Optional[float] = None
    failed: bool = False

    def __post_init__(self) -> None:
        for name in ("l2_bound", "linf_bound", "failure_prob"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative, got {value}")


def _check_step(sigma: float) -> float:
    if not sigma > 0 or not math.isfinite(sigma):
        raise InvalidArgumentError(f"finite-difference step must be positive, got {sigma}")
    return float(sigma)


def signs(g: Vector) -> Vector:
    # sign(0) counts as positive
    return np.where(g >= 0, 1.0, -1.0)


def fd_component(
    objective: SmoothObjective,
    x: Any,
    i: int,
    sigma: float,
    ledger: Optional[QueryLedger] = None,
) -> tuple:
    """
    One forward-difference partial derivative.

    Args:
        objective: Function-value oracle.
        x: Base point.
        i: Coordinate index.
        sigma: Step size (> 0).
        ledger: Optional ledger charged with the two function queries.

    Returns:
        tuple: ((f(x + sigma e_i) - f(x)) / sigma, 2)
    """
    sigma = _check_step(sigma)
    x = as_vector(x, "x")
    if not 0 <= int(i) < x.size:
        raise InvalidArgumentError(f"coordinate {i} outside [0, {x.size})")
    shifted = x.copy()
    shifted[int(i)] += sigma
    value = (objective.value(shifted, ledger) - objective.value(x, ledger)) / sigma
    return value, 2


def forward_differences(objective: SmoothObjective, x: Vector, sigma: float) -> Vector:
    """All d partial forward differences with a shared base value; charges nothing."""
    base = objective.value(x)
    g = np.empty(x.size)
    shifted = x.copy()
    for i in range(x.size):
        shifted[i] += sigma
        g[i] = (objective.value(shifted) - base) / sigma
        shifted[i] = x[i]
    return g


def fd_gradient(
    objective: SmoothObjective,
    x: Any,
    sigma: float,
    ledger: Optional[QueryLedger] = None,
) -> GradientEstimate:
    """Forward-difference gradient; d+1 function queries, l2 error <= sqrt(d) L sigma / 2."""
    sigma = _check_step(sigma)
    x = as_vector(x, "x")
    g = forward_differences(objective, x, sigma)
    queries = x.size + 1
    if ledger is not None:
        ledger.charge_function_queries(queries)
    bound = math.sqrt(x.size) * objective.smoothness * sigma / 2.0
    return GradientEstimate(g=g, charged_queries=queries, l2_bound=bound)


def bounded_error_inject(
    g_true: Any,
    eps: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    target: str = "abs",
) -> Vector:
    """
    Perturb a vector so that the result stays within eps of it in l-infinity norm.

    Worst-case mode moves every coordinate by exactly eps against the leader
    selected by `target` ("abs": argmax |g|, "max": argmax g, "min": argmin g),
    so that a maximum finder is pushed as hard as the bound allows toward a
    wrong index.

    Args:
        g_true: Vector to perturb.
        eps: Error bound (>= 0).
        model: Error model deciding how the perturbation is drawn.
        rng: Generator used by uniform mode; derived from the model when omitted.
        target: Which leader worst-case mode attacks.

    Returns:
        Vector: The perturbed copy.
    """
    if not eps >= 0 or not math.isfinite(eps):
        raise InvalidArgumentError(f"error bound must be nonnegative, got {eps}")
    if target not in INJECTION_TARGETS:
        raise InvalidArgumentError(f"unknown injection target '{target}'")
    g = as_vector(g_true, "g_true")
    if eps == 0 or model.is_exact:
        return g.copy()

    if model.mode is ErrorMode.WORST_CASE:
        if target == "abs":
            direction = signs(g)
            leader = int(np.argmax(np.abs(g)))
        elif target == "max":
            direction = np.ones_like(g)
            leader = int(np.argmax(g))
        else:
            direction = -np.ones_like(g)
            leader = int(np.argmin(g))
        out = g + direction * eps
        out[leader] = g[leader] - direction[leader] * eps
        return out

    if model.mode is ErrorMode.UNIFORM:
        rng = rng if rng is not None else model.generator("uniform", fingerprint(g))
        return g + rng.uniform(-eps, eps, size=g.size)

    return g + eps * model.consistent_offsets("coordinate", g.size)


def jordan_error_bound(dim: int, smoothness: float, r: float, rho: float) -> float:
    """l-infinity error bound 8 pi d^2 (d/rho + 1) L r / rho of the one-query gradient routine."""
    return 8.0 * math.pi * dim**2 * (dim / rho + 1.0) * smoothness * r / rho


def jordan_gradient_emulate(
    objective: SmoothObjective,
    x: Any,
    r: float,
    rho: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> GradientEstimate:
    """
    Emulate the one-query quantum gradient routine through its error contract.

    With probability 1 - rho every coordinate is within B of the exact gradient;
    otherwise one random coordinate is moved out to the configured multiple of B.

    Args:
        objective: Objective carrying an exact gradient.
        x: Evaluation point.
        r: Grid radius (> 0).
        rho: Failure probability in (0, 1].
        model: Error model.
        rng: Run-level generator; derived from the model and x when omitted.
        ledger: Charged with exactly one quantum query.

    Returns:
        GradientEstimate: The estimate with linf_bound = B and failure_prob = rho.
    """
    if not r > 0 or not math.isfinite(r):
        raise InvalidArgumentError(f"radius r must be positive, got {r}")
    if not 0 < rho <= 1:
        raise InvalidArgumentError(f"failure probability must be in (0, 1], got {rho}")
    if not objective.has_gradient:
        raise InvalidArgumentError("gradient emulation requires the exact gradient callback")

    x = as_vector(x, "x")
    grad = as_vector(objective.gradient(x), "gradient")
    bound = jordan_error_bound(x.size, objective.smoothness, r, rho)
    rng = rng if rng is not None else model.generator("jordan", fingerprint(x))

    g = bounded_error_inject(grad, bound, model, rng=rng, target="abs")
    failed = False
    if not model.is_exact and rng.random() < rho:
        failed = True
        j = int(rng.integers(x.size))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        g[j] = grad[j] + sign * get_solver_config()["jordan_outlier_factor"] * bound
        logger.debug(f"Gradient emulation failure injected at coordinate {j}")

    if ledger is not None:
        ledger.charge_quantum_queries(1)
    return GradientEstimate(g=g, charged_queries=1, linf_bound=bound, failure_prob=float(rho), failed=failed)
