#!/usr/bin/env python
"""
Core numeric types shared by every solver.

This module provides the constraint sets (l1 ball, simplex, latent group norm
ball, nuclear norm ball), the smooth objective wrapper with its metadata, the
query ledger that every emulated subroutine charges, and the seeded error model
that decides how emulated noise is drawn.
"""

import hashlib
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from config import get_solver_config
from qfw.errors import DegenerateInputError, InvalidArgumentError

logger = logging.getLogger("domain")

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

_MASK64 = (1 << 64) - 1


def as_vector(x: Any, name: str = "vector") -> Vector:
    """Convert to a finite 1-D float array of length >= 1."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return arr


def as_matrix(m: Any, name: str = "matrix") -> Matrix:
    """Convert to a finite 2-D float array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return arr


def fingerprint(*arrays: Any) -> int:
    """64-bit content hash of one or more arrays (shape included)."""
    digest = hashlib.blake2b(digest_size=8)
    for a in arrays:
        arr = np.ascontiguousarray(a, dtype=np.float64)
        digest.update(str(arr.shape).encode("utf-8"))
        digest.update(arr.tobytes())
    return int.from_bytes(digest.digest(), "little")


def _entropy(key: Any) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)) and int(key) >= 0:
        return int(key) & _MASK64
    if isinstance(key, np.ndarray):
        return fingerprint(key)
    digest = hashlib.blake2b(repr(key).encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def curvature_upper_bound(L: float, D: float) -> float:
    """
    Upper bound on the curvature constant of an L-smooth function over a set of diameter D.

    Args:
        L: Smoothness constant (>= 0).
        D: Diameter of the domain (>= 0).

    Returns:
        float: L * D**2.
    """
    if L < 0 or D < 0 or not math.isfinite(L) or not math.isfinite(D):
        raise InvalidArgumentError(f"curvature bound needs finite L >= 0 and D >= 0, got L={L}, D={D}")
    return float(L) * float(D) ** 2


# --- Constraint sets ---


class ConstraintSet(ABC):
    """Compact convex feasible region of a Frank-Wolfe run."""

    @property
    @abstractmethod
    def shape(self) -> Tuple[int, ...]:
        """Shape of points of the set."""

    @abstractmethod
    def diameter(self) -> float:
        """Euclidean (Frobenius) diameter, or a documented upper bound."""

    @abstractmethod
    def norm(self, point: Any) -> float:
        """Value of the norm (gauge) that defines the set."""

    @abstractmethod
    def initial_point(self) -> NDArray[np.float64]:
        """A feasible starting point."""

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def _checked(self, point: Any) -> NDArray[np.float64]:
        arr = np.asarray(point, dtype=np.float64)
        if arr.shape != self.shape:
            raise InvalidArgumentError(f"dimension mismatch: expected {self.shape}, got {arr.shape}")
        return arr

    def contains(self, point: Any, tol: Optional[float] = None) -> bool:
        """Membership with an absolute tolerance on the defining norm."""
        tol = get_solver_config()["membership_tol"] if tol is None else tol
        return bool(self.norm(point) <= self.radius + tol)

    @property
    def radius(self) -> float:
        return 1.0


@dataclass(frozen=True)
class L1Ball(ConstraintSet):
    """{x in R^d : ||x||_1 <= radius}."""

    dimension: int
    radius: float = 1.0

    def __post_init__(self) -> None:
        if int(self.dimension) < 1:
            raise InvalidArgumentError(f"L1Ball needs dimension >= 1, got {self.dimension}")
        if not self.radius > 0:
            raise InvalidArgumentError(f"L1Ball radius must be positive, got {self.radius}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (int(self.dimension),)

    def diameter(self) -> float:
        return 2.0 * self.radius

    def norm(self, point: Any) -> float:
        return float(np.abs(self._checked(point)).sum())

    def initial_point(self) -> Vector:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class Simplex(ConstraintSet):
    """Probability simplex conv{e_1, ..., e_d}."""

    dimension: int

    def __post_init__(self) -> None:
        if int(self.dimension) < 1:
            raise InvalidArgumentError(f"Simplex needs dimension >= 1, got {self.dimension}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (int(self.dimension),)

    def diameter(self) -> float:
        return math.sqrt(2.0) if self.dimension >= 2 else 0.0

    def norm(self, point: Any) -> float:
        # Gauge that equals 1 exactly on the simplex and exceeds it elsewhere.
        x = self._checked(point)
        return 1.0 + max(float(-x.min()), abs(float(x.sum()) - 1.0), 0.0)

    def initial_point(self) -> Vector:
        x = np.zeros(self.shape)
        x[0] = 1.0
        return x


def dual_exponent(p: float) -> float:
    """Hoelder conjugate q of p (1/p + 1/q = 1), with 1 <-> inf."""
    if not p >= 1:
        raise InvalidArgumentError(f"p-norm exponent must be >= 1, got {p}")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class LatentGroupBall(ConstraintSet):
    """
    Unit ball of the latent group norm built from (possibly overlapping) groups.

    ||x||_G = min { sum_i ||v_i||_{p_i} : supp(v_i) in g_i, sum_i v_i = x }.
    """

    groups: Tuple[Tuple[int, ...], ...]
    p_norms: Tuple[float, ...]
    radius: float = 1.0
    dimension: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        p_norms = tuple(float(p) for p in self.p_norms)
        if not groups:
            raise InvalidArgumentError("LatentGroupBall needs at least one group")
        if len(groups) != len(p_norms):
            raise InvalidArgumentError(f"{len(groups)} groups but {len(p_norms)} p-norms")
        for g in groups:
            if not g or len(set(g)) != len(g) or min(g) < 0:
                raise InvalidArgumentError(f"invalid group {g}")
        for p in p_norms:
            dual_exponent(p)
        if not self.radius > 0:
            raise InvalidArgumentError(f"LatentGroupBall radius must be positive, got {self.radius}")
        covered = set(j for g in groups for j in g)
        dim = max(covered) + 1
        if covered != set(range(dim)):
            raise InvalidArgumentError("groups must cover every coordinate 0..d-1")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "p_norms", p_norms)
        object.__setattr__(self, "dimension", dim)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.dimension,)

    @property
    def max_group_size(self) -> int:
        return max(len(g) for g in self.groups)

    @property
    def is_disjoint(self) -> bool:
        return sum(len(g) for g in self.groups) == self.dimension

    def diameter(self) -> float:
        # Upper bound: every atom is a unit l_p vector on one group.
        spread = max(
            len(g) ** max(0.0, 0.5 - (0.0 if math.isinf(p) else 1.0 / p))
            for g, p in zip(self.groups, self.p_norms)
        )
        return 2.0 * self.radius * spread

    def norm(self, point: Any) -> float:
        x = self._checked(point)
        if self.is_disjoint:
            return float(sum(np.linalg.norm(x[list(g)], ord=p) for g, p in zip(self.groups, self.p_norms)))
        return self._latent_norm(x)

    def contains(self, point: Any, tol: Optional[float] = None) -> bool:
        tol = get_solver_config()["membership_tol"] if tol is None else tol
        if not self.is_disjoint:
            if self._single_group_bound(self._checked(point)) <= self.radius + tol:
                return True
            # the latent norm comes from an interior-point solve
            tol = max(tol, 1e-6 * self.radius)
        return bool(self.norm(point) <= self.radius + tol)

    def _single_group_bound(self, x: Vector) -> float:
        """Smallest l_p norm of x over the groups covering its support; an upper bound on the latent norm."""
        support = set(np.flatnonzero(x).tolist())
        bounds = [
            float(np.linalg.norm(x[list(g)], ord=p))
            for g, p in zip(self.groups, self.p_norms)
            if support <= set(g)
        ]
        return min(bounds, default=math.inf)

    def _latent_norm(self, x: Vector) -> float:
        import cvxpy as cp

        sizes = [len(g) for g in self.groups]
        z = cp.Variable(sum(sizes))
        assign = np.zeros((self.dimension, sum(sizes)))
        terms = []
        offset = 0
        for g, p, size in zip(self.groups, self.p_norms, sizes):
            for k, j in enumerate(g):
                assign[j, offset + k] = 1.0
            terms.append(_cvx_pnorm(z[offset:offset + size], p))
            offset += size
        problem = cp.Problem(cp.Minimize(sum(terms)), [assign @ z == x])
        problem.solve()
        if problem.status not in ("optimal", "optimal_inaccurate"):
            raise DegenerateInputError(f"latent group norm solve ended with status {problem.status}")
        return float(problem.value)

    def initial_point(self) -> Vector:
        return np.zeros(self.shape)


def _cvx_pnorm(expr: Any, p: float) -> Any:
    import cvxpy as cp

    if p == 1:
        return cp.norm1(expr)
    if math.isinf(p):
        return cp.norm_inf(expr)
    if p == 2:
        return cp.norm2(expr)
    return cp.pnorm(expr, p)


@dataclass(frozen=True)
class NuclearBall(ConstraintSet):
    """{X : ||X||_tr <= radius} over d1 x d2 matrices."""

    rows: int
    cols: int
    radius: float = 1.0

    def __post_init__(self) -> None:
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise InvalidArgumentError(f"NuclearBall needs positive shape, got {(self.rows, self.cols)}")
        if not self.radius > 0:
            raise InvalidArgumentError(f"NuclearBall radius must be positive, got {self.radius}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (int(self.rows), int(self.cols))

    def diameter(self) -> float:
        return 2.0 * self.radius

    def norm(self, point: Any) -> float:
        return float(np.linalg.svd(self._checked(point), compute_uv=False).sum())

    def initial_point(self) -> Matrix:
        return np.zeros(self.shape)


def diameter(constraint_set: ConstraintSet) -> float:
    """Diameter of a constraint set (exact, or a certified bound for group balls)."""
    return constraint_set.diameter()


def contains(constraint_set: ConstraintSet, point: Any) -> bool:
    """Membership test with the configured tolerance."""
    return constraint_set.contains(point)


# --- Objective ---


@dataclass(frozen=True)
class SmoothObjective:
    """
    Function-value oracle of a convex L-smooth objective plus its metadata.

    The exact gradient is optional: emulators of quantum gradient routines and
    the diagnostics of a run use it, the forward-difference solvers never do.
    """

    value_fn: Callable[[Any], float]
    smoothness: float
    diameter: float
    gradient_fn: Optional[Callable[[Any], Any]] = None
    lipschitz: Optional[float] = None
    curvature_bound: Optional[float] = None
    name: str = "objective"

    def __post_init__(self) -> None:
        if self.smoothness < 0 or self.diameter < 0:
            raise InvalidArgumentError("smoothness and diameter must be nonnegative")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise InvalidArgumentError("Lipschitz constant must be nonnegative")

    @property
    def curvature(self) -> float:
        """C_f bound used by every schedule (L * D**2 unless supplied)."""
        if self.curvature_bound is not None:
            return float(self.curvature_bound)
        return curvature_upper_bound(self.smoothness, self.diameter)

    @property
    def has_gradient(self) -> bool:
        return self.gradient_fn is not None

    def value(self, x: Any, ledger: Optional["QueryLedger"] = None) -> float:
        """Evaluate f(x); charges one function query when a ledger is given."""
        if ledger is not None:
            ledger.charge_function_queries(1)
        return float(self.value_fn(x))

    def gradient(self, x: Any) -> NDArray[np.float64]:
        if self.gradient_fn is None:
            raise InvalidArgumentError(f"objective '{self.name}' has no exact gradient")
        return np.asarray(self.gradient_fn(x), dtype=np.float64)


# --- Query ledger ---


@dataclass
class LedgerEntry:
    """Charges accumulated during one iteration (iteration 0 is setup)."""

    iteration: int = 0
    function_queries: int = 0
    quantum_queries: int = 0
    matvecs: int = 0
    gradient_evaluations: int = 0
    time_cost: float = 0.0

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_COUNTERS = ("function_queries", "quantum_queries", "matvecs", "gradient_evaluations", "time_cost")


class QueryLedger:
    """
    Per-iteration counters of charged queries and abstract time.

    A ledger belongs to a single run. Charges go to the current iteration entry;
    totals are kept alongside and always equal the sum of the entries.
    """

    def __init__(self) -> None:
        self._entries: List[LedgerEntry] = [LedgerEntry(iteration=0)]
        self._totals = LedgerEntry(iteration=-1)

    def begin_iteration(self, iteration: int) -> None:
        """Open a fresh entry; later charges are attributed to it."""
        if iteration <= self._entries[-1].iteration:
            raise InvalidArgumentError(
                f"iteration {iteration} does not follow {self._entries[-1].iteration}"
            )
        self._entries.append(LedgerEntry(iteration=iteration))

    def _charge(self, counter: str, amount: float) -> None:
        if amount < 0 or not math.isfinite(amount):
            raise InvalidArgumentError(f"cannot charge {amount} to {counter}")
        entry = self._entries[-1]
        setattr(entry, counter, getattr(entry, counter) + amount)
        setattr(self._totals, counter, getattr(self._totals, counter) + amount)

    def charge_function_queries(self, count: int) -> None:
        self._charge("function_queries", int(count))

    def charge_quantum_queries(self, count: int) -> None:
        self._charge("quantum_queries", int(count))

    def charge_matvecs(self, count: int) -> None:
        self._charge("matvecs", int(count))

    def charge_gradient_evaluations(self, count: int) -> None:
        self._charge("gradient_evaluations", int(count))

    def charge_time(self, cost: float) -> None:
        self._charge("time_cost", float(cost))

    def merge(self, other: "QueryLedger") -> None:
        """Add every total of another ledger to the current entry."""
        for counter in _COUNTERS:
            value = getattr(other._totals, counter)
            if value:
                self._charge(counter, value)

    @property
    def entries(self) -> Tuple[LedgerEntry, ...]:
        return tuple(LedgerEntry(**e.as_dict()) for e in self._entries)

    @property
    def iterations(self) -> int:
        return len(self._entries) - 1

    def current(self) -> LedgerEntry:
        return LedgerEntry(**self._entries[-1].as_dict())

    def totals(self) -> LedgerEntry:
        return LedgerEntry(**self._totals.as_dict())

    def summed_entries(self) -> LedgerEntry:
        """Totals recomputed from the entries."""
        summed = LedgerEntry(iteration=-1)
        for entry in self._entries:
            for counter in _COUNTERS:
                setattr(summed, counter, getattr(summed, counter) + getattr(entry, counter))
        return summed

    def as_dict(self) -> Dict[str, Any]:
        totals = self._totals.as_dict()
        totals.pop("iteration")
        totals["iterations"] = self.iterations
        return totals


# --- Error model ---


class ErrorMode(str, Enum):
    """How emulated noise is drawn inside its guaranteed bound."""

    WORST_CASE = "worst_case"
    UNIFORM = "uniform"
    CONSISTENT = "consistent"
    EXACT = "exact"


@dataclass(frozen=True)
class ErrorModel:
    """
    Seeded description of emulated quantum noise.

    Random streams are derived from (seed, key) so identical inputs give
    identical outputs. Consistent mode keys its perturbations by the logical
    item, which makes repeated calls on the same item agree.
    """

    mode: ErrorMode = ErrorMode.CONSISTENT
    seed: int = 0

    def __post_init__(self) -> None:
        try:
            mode = ErrorMode(self.mode)
        except ValueError:
            raise InvalidArgumentError(
                f"unknown error mode '{self.mode}', expected one of {[m.value for m in ErrorMode]}"
            )
        seed = int(self.seed)
        if seed < 0 or seed > _MASK64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "seed", seed)

    @property
    def is_exact(self) -> bool:
        return self.mode is ErrorMode.EXACT

    def generator(self, *key: Any) -> np.random.Generator:
        """Independent reproducible stream for the given key."""
        return np.random.default_rng([self.seed, *[_entropy(k) for k in key]])

    def consistent_offsets(self, item: Any, count: int) -> Vector:
        """Offsets in [-1, 1] fixed by (seed, item); entry i depends only on i."""
        return self.generator("consistent", item).uniform(-1.0, 1.0, size=int(count))
