#!/usr/bin/env python
"""
Predicted per-round costs of every solver variant and measured-vs-predicted reports.

All asymptotic constants are 1 and polylog(d) is ln(d) ** polylog_exponent.
Qubit and gate counts are echoed for reports and never asserted.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, TypedDict

import numpy as np

from qfw.domain import QueryLedger
from qfw.errors import InvalidArgumentError
from qfw.lmo_matrix import polylog

logger = logging.getLogger("cost_model")

VECTOR_VARIANTS = ("classical_fw", "qfw_maxfind", "qfw_jordan", "classical_group", "qfw_group")
MATRIX_VARIANTS = ("power", "lanczos", "qtsve", "qpm")

# ledger counter each prediction is compared against
MEASURED_COUNTER = {
    "classical_fw": "function_queries",
    "qfw_maxfind": "function_queries",
    "qfw_jordan": "quantum_queries",
    "classical_group": "function_queries",
    "qfw_group": "function_queries",
    "power": "time_cost",
    "lanczos": "time_cost",
    "qtsve": "time_cost",
    "qpm": "time_cost",
}

_REQUIRED = {
    "classical_fw": ("d",),
    "qfw_maxfind": ("d", "C_f", "p", "epsilon"),
    "qfw_jordan": ("d",),
    "classical_group": ("group_sizes",),
    "qfw_group": ("num_groups", "max_group_size", "C_f", "p", "epsilon"),
    "power": ("d", "sigma1", "epsilon"),
    "lanczos": ("d", "sigma1", "epsilon"),
    "qtsve": ("d", "r", "sigma1", "sigma2", "epsilon"),
    "qpm": ("d", "r", "sigma1", "gamma_min", "epsilon"),
}


@dataclass(frozen=True)
class CostPrediction:
    """Closed-form cost of one variant with its inputs echoed."""

    variant: str
    per_round_cost: float
    iteration_count: Optional[float] = None
    qubits: Optional[float] = None
    gates: Optional[float] = None
    inputs: Dict[str, Any] = field(default_factory=dict)
    derived: Dict[str, float] = field(default_factory=dict)

    @property
    def total_cost(self) -> Optional[float]:
        if self.iteration_count is None:
            return None
        return self.iteration_count * self.per_round_cost

    def as_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "iteration_count": self.iteration_count,
            "per_round_cost": self.per_round_cost,
            "qubits": self.qubits,
            "gates": self.gates,
            "inputs": dict(self.inputs),
            "derived": dict(self.derived),
        }


class ComparisonReport(TypedDict):
    """Measured ledger against a prediction."""

    variant: str
    counter: str
    rounds: int
    measured: float
    predicted: float
    ratio: float
    per_round_measured: List[float]


def _validated(variant: str, params: Dict[str, Any]) -> Dict[str, Any]:
    missing = [name for name in _REQUIRED[variant] if params.get(name) is None]
    if missing:
        raise InvalidArgumentError(f"prediction for '{variant}' is missing {missing}")
    for name, value in params.items():
        if value is None or name == "group_sizes":
            continue
        if name == "sigma2" and float(value) == 0:
            continue
        if not float(value) > 0 or not math.isfinite(float(value)):
            raise InvalidArgumentError(f"prediction parameter {name} must be positive, got {value}")
    return params


def _log_floor(value: float) -> float:
    return max(math.log(value), 1.0)


def _iterations(params: Dict[str, Any]) -> Optional[float]:
    if params.get("C_f") is None or params.get("epsilon") is None:
        return None
    return float(params["C_f"]) / float(params["epsilon"])


def predict_vector(variant: str, **params: Any) -> CostPrediction:
    """
    Per-round function-query cost of a vector variant.

    Args:
        variant: One of VECTOR_VARIANTS.
        **params: d, C_f, p, epsilon, and for the group variants num_groups,
            max_group_size or group_sizes; G and rho feed the qubit column.

    Returns:
        CostPrediction: The evaluated formula.
    """
    if variant not in VECTOR_VARIANTS:
        raise InvalidArgumentError(f"unknown vector variant '{variant}'")
    params = _validated(variant, params)
    qubits = gates = None

    if variant == "classical_fw":
        per_round = float(params["d"])
    elif variant == "qfw_maxfind":
        d = float(params["d"])
        per_round = math.sqrt(d) * _log_floor(params["C_f"] / (params["p"] * params["epsilon"]))
        qubits = d + _log_floor(1.0 / params["epsilon"])
        gates = math.sqrt(d)
    elif variant == "qfw_jordan":
        d = float(params["d"])
        per_round = 1.0
        gates = d * _log_floor(d)
        if all(params.get(name) for name in ("G", "rho", "epsilon")):
            qubits = d * _log_floor(params["G"] * d / (params["rho"] * params["epsilon"]))
    elif variant == "classical_group":
        per_round = float(sum(params["group_sizes"]))
    else:
        per_round = (
            math.sqrt(params["num_groups"])
            * params["max_group_size"]
            * _log_floor(params["C_f"] / (params["p"] * params["epsilon"]))
        )

    return CostPrediction(
        variant=variant,
        per_round_cost=per_round,
        iteration_count=_iterations(params),
        qubits=qubits,
        gates=gates,
        inputs=dict(params),
    )


def _matrix_formula(variant: str, params: Dict[str, Any]) -> float:
    d = float(params["d"])
    sigma1 = float(params["sigma1"])
    eps = float(params["epsilon"])
    if variant == "power":
        return sigma1 * d**2 * _log_floor(d) / eps
    if variant == "lanczos":
        return math.sqrt(sigma1) * d**2 * _log_floor(d) / math.sqrt(eps)
    if variant == "qtsve":
        gap = sigma1 - float(params["sigma2"])
        if gap <= 0:
            raise InvalidArgumentError("qtsve prediction needs sigma1 > sigma2")
        return params["r"] * sigma1**3 * d * polylog(int(d)) / (gap * eps**2)
    if sigma1 >= 1:
        raise InvalidArgumentError("qpm prediction needs sigma1 < 1")
    return (
        math.sqrt(params["r"]) * sigma1**4 * d * polylog(int(d))
        / ((1.0 - sigma1) * params["gamma_min"] ** 3 * eps**3)
    )


def predict_matrix(variant: str, **params: Any) -> CostPrediction:
    """
    Per-round update cost of a matrix variant.

    Quantum predictions carry derived report-only numbers: the cost with the
    tomography parallelised away (d removed) and the ratio against the power
    and Lanczos baselines.
    """
    if variant not in MATRIX_VARIANTS:
        raise InvalidArgumentError(f"unknown matrix variant '{variant}'")
    params = _validated(variant, params)
    per_round = _matrix_formula(variant, params)
    derived: Dict[str, float] = {}
    if variant in ("qtsve", "qpm"):
        derived["parallel_per_round"] = per_round / float(params["d"])
        derived["ratio_to_power"] = per_round / _matrix_formula("power", params)
        derived["ratio_to_lanczos"] = per_round / _matrix_formula("lanczos", params)
    return CostPrediction(
        variant=variant,
        per_round_cost=per_round,
        iteration_count=_iterations(params),
        inputs=dict(params),
        derived=derived,
    )


def compare(ledger: QueryLedger, prediction: CostPrediction, counter: Optional[str] = None) -> ComparisonReport:
    """Mean measured per-round cost against the predicted one."""
    counter = counter or MEASURED_COUNTER[prediction.variant]
    per_round = [float(getattr(entry, counter)) for entry in ledger.entries[1:]]
    measured = float(np.mean(per_round)) if per_round else 0.0
    ratio = measured / prediction.per_round_cost if prediction.per_round_cost else math.inf
    logger.debug(f"{prediction.variant}: measured {measured:.6g} vs predicted {prediction.per_round_cost:.6g}")
    return ComparisonReport(
        variant=prediction.variant,
        counter=counter,
        rounds=len(per_round),
        measured=measured,
        predicted=prediction.per_round_cost,
        ratio=ratio,
        per_round_measured=per_round,
    )


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or xs.shape != ys.shape:
        raise InvalidArgumentError("slope fit needs at least two matching points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidArgumentError("slope fit needs positive values")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def fit_scaling_constant(measured: Sequence[float], basis: Sequence[float]) -> Tuple[float, float]:
    """
    Fit measured ~ c * basis.

    Returns:
        tuple: (mean c, relative spread (max c - min c) / mean c)
    """
    constants = np.asarray(measured, dtype=np.float64) / np.asarray(basis, dtype=np.float64)
    mean = float(constants.mean())
    return mean, float((constants.max() - constants.min()) / mean)
