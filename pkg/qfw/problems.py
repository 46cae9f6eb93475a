#!/usr/bin/env python
"""
Seeded test problems with known smoothness metadata and reference optima.

Every generator draws from numpy.random.default_rng(seed), so an instance is a
pure function of its arguments. Reference optima carry a provenance tag:
closed_form, convex_solver (cvxpy solve), brute_force, or long_run (best value
of a long exact Frank-Wolfe run; acceptance tolerances widen by 10%).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from config import get_solver_config
from qfw.domain import (
    ConstraintSet,
    L1Ball,
    LatentGroupBall,
    NuclearBall,
    Simplex,
    SmoothObjective,
    as_matrix,
    as_vector,
)
from qfw.errors import DegenerateInputError, InvalidArgumentError
from qfw.lmo_vector import LmoResult

logger = logging.getLogger("problems")

PROVENANCES = ("closed_form", "convex_solver", "brute_force", "long_run")
_LONG_RUN_SLACK = 0.10


@dataclass(frozen=True)
class ProblemInstance:
    """Objective, feasible set and reference optimum of one test problem."""

    kind: str
    objective: SmoothObjective
    constraint_set: ConstraintSet
    reference_optimum: float
    provenance: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    gradient_callback: Optional[Callable[[np.ndarray], np.ndarray]] = None
    planted: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise InvalidArgumentError(f"unknown provenance '{self.provenance}'")

    @property
    def is_matrix(self) -> bool:
        return isinstance(self.constraint_set, NuclearBall)

    def tolerance(self, eps: float) -> float:
        """Accuracy target widened when the reference comes from a long run."""
        return eps * (1.0 + _LONG_RUN_SLACK) if self.provenance == "long_run" else eps

    def primal_gap(self, value: float) -> float:
        return value - self.reference_optimum


# --- Projections used by closed-form references ---


def project_simplex(v: np.ndarray, s: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = s} by sorting."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (cssv - s))[0][-1]
    theta = (cssv[rho] - s) / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


def project_l1_ball(v: np.ndarray, s: float = 1.0) -> np.ndarray:
    """Euclidean projection onto the l1 ball of radius s."""
    v = np.asarray(v, dtype=np.float64)
    magnitude = np.abs(v)
    if magnitude.sum() <= s:
        return v.copy()
    return np.sign(v) * project_simplex(magnitude, s)


# --- Vector problems ---


def least_squares_instance(
    A: Any,
    b: Any,
    radius: float = 1.0,
    planted: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
    params: Optional[Dict[str, Any]] = None,
) -> ProblemInstance:
    """
    f(x) = 1/2 ||Ax - b||^2 over the l1 ball, with L = sigma_max(A)^2.

    The reference is 0 when the planted point is feasible and reproduces b,
    otherwise it comes from a cvxpy solve.
    """
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.size:
        raise InvalidArgumentError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    ball = L1Ball(A.shape[1], radius)
    spectral = float(np.linalg.norm(A, ord=2))

    def value(x: np.ndarray) -> float:
        r = A @ x - b
        return 0.5 * float(r @ r)

    def gradient(x: np.ndarray) -> np.ndarray:
        return A.T @ (A @ x - b)

    objective = SmoothObjective(
        value_fn=value,
        gradient_fn=gradient,
        smoothness=spectral**2,
        lipschitz=spectral * (spectral * radius + float(np.linalg.norm(b))),
        diameter=ball.diameter(),
        name="least_squares",
    )
    if not np.any(b):
        reference, provenance = 0.0, "closed_form"
    elif planted is not None and ball.contains(planted) and np.allclose(A @ planted, b, rtol=0, atol=1e-12):
        reference, provenance = 0.0, "closed_form"
    else:
        reference, provenance = _least_squares_reference(A, b, radius), "convex_solver"
    return ProblemInstance(
        kind="least_squares_l1",
        objective=objective,
        constraint_set=ball,
        reference_optimum=reference,
        provenance=provenance,
        params=dict(params or {}),
        seed=seed,
        planted=planted,
    )


def _least_squares_reference(A: np.ndarray, b: np.ndarray, radius: float) -> float:
    import cvxpy as cp

    x = cp.Variable(A.shape[1])
    problem = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(A @ x - b)), [cp.norm1(x) <= radius])
    problem.solve()
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise DegenerateInputError(f"reference solve ended with status {problem.status}")
    # evaluate at a feasible rescaling so the reference is attained inside the ball
    point = np.asarray(x.value, dtype=np.float64)
    norm = np.abs(point).sum()
    if norm > radius:
        point *= radius / norm
    r = A @ point - b
    return 0.5 * float(r @ r)


def make_least_squares_l1(
    d: int,
    n_rows: int,
    sparsity: int,
    noise: float,
    seed: int,
    radius: float = 1.0,
) -> ProblemInstance:
    """
    Least squares with a planted sparse x0 of l1 norm 0.8 * radius.

    A degenerate design (sigma_max = 0) is regenerated with the next seed.
    """
    if d < 1 or n_rows < 1:
        raise InvalidArgumentError(f"need d, n_rows >= 1, got d={d}, n_rows={n_rows}")
    if not 0 <= sparsity <= d:
        raise InvalidArgumentError(f"sparsity must be in [0, {d}], got {sparsity}")
    if noise < 0:
        raise InvalidArgumentError(f"noise must be nonnegative, got {noise}")

    for attempt in range(10):
        rng = np.random.default_rng(seed + attempt)
        A = rng.standard_normal((n_rows, d)) / math.sqrt(n_rows)
        if np.linalg.norm(A, ord=2) > 0:
            break
        logger.warning(f"Degenerate design for seed {seed + attempt}, regenerating")
    else:
        raise DegenerateInputError("could not draw a nondegenerate design matrix")

    x0 = np.zeros(d)
    if sparsity:
        support = rng.choice(d, size=sparsity, replace=False)
        x0[support] = rng.standard_normal(sparsity)
        x0 *= 0.8 * radius / np.abs(x0).sum()
    b = A @ x0
    if noise > 0:
        b = b + noise * rng.standard_normal(n_rows)
    params = {"d": d, "n_rows": n_rows, "sparsity": sparsity, "noise": noise, "radius": radius}
    return least_squares_instance(A, b, radius, planted=x0 if noise == 0 else None, seed=seed, params=params)


def simplex_quadratic_instance(y_star: Any, seed: Optional[int] = None) -> ProblemInstance:
    """f(x) = 1/2 ||x - y*||^2 over the simplex; the reference is the projection of y*."""
    y_star = as_vector(y_star, "y_star")
    simplex = Simplex(y_star.size)
    nearest = project_simplex(y_star)
    objective = SmoothObjective(
        value_fn=lambda x: 0.5 * float(np.sum((x - y_star) ** 2)),
        gradient_fn=lambda x: x - y_star,
        smoothness=1.0,
        lipschitz=math.sqrt(2.0) + float(np.linalg.norm(y_star - nearest)),
        diameter=simplex.diameter(),
        name="simplex_quadratic",
    )
    return ProblemInstance(
        kind="simplex_quadratic",
        objective=objective,
        constraint_set=simplex,
        reference_optimum=0.5 * float(np.sum((nearest - y_star) ** 2)),
        provenance="closed_form",
        params={"d": y_star.size},
        seed=seed,
        planted=y_star,
    )


def make_simplex_quadratic(d: int, seed: int) -> ProblemInstance:
    """Quadratic with y* drawn from a flat Dirichlet (simplex interior); f* = 0."""
    if d < 1:
        raise InvalidArgumentError(f"need d >= 1, got {d}")
    rng = np.random.default_rng(seed)
    return simplex_quadratic_instance(rng.dirichlet(np.ones(d)), seed=seed)


def make_groups(d: int, group_size: int, overlap: int = 0) -> List[List[int]]:
    """Contiguous windows of group_size with the given overlap, covering 0..d-1."""
    if not 1 <= group_size <= d or not 0 <= overlap < group_size:
        raise InvalidArgumentError(f"invalid grouping d={d}, size={group_size}, overlap={overlap}")
    stride = group_size - overlap
    groups = []
    start = 0
    while True:
        end = min(start + group_size, d)
        groups.append(list(range(max(0, end - group_size), end)))
        if end == d:
            return groups
        start += stride


def make_group_instance(
    groups: Sequence[Sequence[int]],
    p_norms: Sequence[float],
    seed: int,
    radius: float = 1.0,
) -> ProblemInstance:
    """
    f(x) = 1/2 ||x - x0||^2 over the latent group ball.

    x0 lives on one random group with group norm 0.5 * radius, so f* = 0.
    """
    ball = LatentGroupBall(groups=groups, p_norms=p_norms, radius=radius)
    rng = np.random.default_rng(seed)
    chosen = int(rng.integers(len(ball.groups)))
    idx = list(ball.groups[chosen])
    direction = rng.standard_normal(len(idx))
    if not np.any(direction):
        direction[0] = 1.0
    x0 = np.zeros(ball.dimension)
    x0[idx] = 0.5 * radius * direction / np.linalg.norm(direction, ord=ball.p_norms[chosen])
    objective = SmoothObjective(
        value_fn=lambda x: 0.5 * float(np.sum((x - x0) ** 2)),
        gradient_fn=lambda x: x - x0,
        smoothness=1.0,
        diameter=ball.diameter(),
        name="group_quadratic",
    )
    return ProblemInstance(
        kind="group",
        objective=objective,
        constraint_set=ball,
        reference_optimum=0.0,
        provenance="closed_form",
        params={"groups": [list(g) for g in ball.groups], "p_norms": list(ball.p_norms), "radius": radius},
        seed=seed,
        planted=x0,
    )


# --- Matrix problems ---


def make_matrix_completion(
    d: int,
    rank: int,
    obs_fraction: float,
    seed: int,
    radius: float = 1.0,
) -> ProblemInstance:
    """
    f(X) = sum over observed (i, j) of (X_ij - Y_ij)^2 with gradient 2 (X - Y) on the mask.

    Y has rank `rank` and trace norm 0.8 * radius, so it is feasible and f* = 0.
    """
    if not 1 <= rank <= d:
        raise InvalidArgumentError(f"rank must be in [1, {d}], got {rank}")
    if not 0 < obs_fraction <= 1:
        raise InvalidArgumentError(f"obs_fraction must be in (0, 1], got {obs_fraction}")
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((d, rank)) @ rng.standard_normal((rank, d))
    Y *= 0.8 * radius / np.linalg.svd(Y, compute_uv=False).sum()
    mask = (rng.random((d, d)) < obs_fraction).astype(np.float64)
    if not mask.any():
        raise DegenerateInputError("observation set is empty")
    ball = NuclearBall(d, d, radius)

    def gradient(X: np.ndarray) -> np.ndarray:
        return 2.0 * (X - Y) * mask

    objective = SmoothObjective(
        value_fn=lambda X: float(np.sum(mask * (X - Y) ** 2)),
        gradient_fn=gradient,
        smoothness=2.0,
        diameter=ball.diameter(),
        name="matrix_completion",
    )
    return ProblemInstance(
        kind="matrix_completion",
        objective=objective,
        constraint_set=ball,
        reference_optimum=0.0,
        provenance="closed_form",
        params={"d": d, "rank": rank, "obs_fraction": obs_fraction, "radius": radius},
        seed=seed,
        gradient_callback=gradient,
        planted=Y,
    )


def make_planted_spectrum(
    d: int,
    singular_values: Sequence[float],
    seed: int,
    radius: float = 1.0,
) -> ProblemInstance:
    """
    f(X) = 1/2 ||X - Y||_F^2 with Y = U diag(s) V^T for random orthogonal U, V.

    The optimum shrinks s onto the l1 ball of the radius, which gives a closed-form f*.
    """
    values = np.sort(np.asarray(singular_values, dtype=np.float64))[::-1]
    if values.size == 0 or values.size > d or np.any(values < 0):
        raise InvalidArgumentError(f"need 1..{d} nonnegative singular values, got {list(singular_values)}")
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((d, d)))
    V, _ = np.linalg.qr(rng.standard_normal((d, d)))
    spectrum = np.zeros(d)
    spectrum[: values.size] = values
    Y = (U * spectrum) @ V.T
    ball = NuclearBall(d, d, radius)
    shrunk = project_l1_ball(spectrum, radius)

    def gradient(X: np.ndarray) -> np.ndarray:
        return X - Y

    objective = SmoothObjective(
        value_fn=lambda X: 0.5 * float(np.sum((X - Y) ** 2)),
        gradient_fn=gradient,
        smoothness=1.0,
        diameter=ball.diameter(),
        name="planted_spectrum",
    )
    return ProblemInstance(
        kind="planted_spectrum",
        objective=objective,
        constraint_set=ball,
        reference_optimum=0.5 * float(np.sum((spectrum - shrunk) ** 2)),
        provenance="closed_form",
        params={"d": d, "singular_values": values.tolist(), "radius": radius},
        seed=seed,
        gradient_callback=gradient,
        planted=Y,
    )


# --- Reference oracles ---


def enumerate_vertices(constraint_set: ConstraintSet, max_vertices: int = 4096) -> List[np.ndarray]:
    """
    Extreme points of an enumerable set.

    l1 ball vertices come as [-tau e_0, +tau e_0, -tau e_1, ...]; group balls
    are enumerable when every p is 1 or inf.
    """
    if isinstance(constraint_set, L1Ball):
        vertices = []
        for i in range(constraint_set.dimension):
            for sign in (-1.0, 1.0):
                vertex = np.zeros(constraint_set.dimension)
                vertex[i] = sign * constraint_set.radius
                vertices.append(vertex)
        return vertices
    if isinstance(constraint_set, Simplex):
        return list(np.eye(constraint_set.dimension))
    if isinstance(constraint_set, LatentGroupBall):
        vertices = []
        for group, p in zip(constraint_set.groups, constraint_set.p_norms):
            if p == 1:
                for j in group:
                    for sign in (-1.0, 1.0):
                        vertex = np.zeros(constraint_set.dimension)
                        vertex[j] = sign * constraint_set.radius
                        vertices.append(vertex)
            elif math.isinf(p) and 2 ** len(group) <= max_vertices:
                for pattern in itertools.product((-1.0, 1.0), repeat=len(group)):
                    vertex = np.zeros(constraint_set.dimension)
                    vertex[list(group)] = constraint_set.radius * np.asarray(pattern)
                    vertices.append(vertex)
            else:
                raise InvalidArgumentError(f"group with p={p} has no finite vertex list")
        return vertices
    raise InvalidArgumentError(f"{type(constraint_set).__name__} is not enumerable")


def _sampled_rank_one(ball: NuclearBall, samples: int, seed: int) -> List[np.ndarray]:
    if max(ball.shape) > 6:
        raise InvalidArgumentError("sampled nuclear-norm atoms are limited to d <= 6")
    rng = np.random.default_rng(seed)
    atoms = []
    for _ in range(samples):
        u = rng.standard_normal(ball.rows)
        v = rng.standard_normal(ball.cols)
        atoms.append(ball.radius * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v)))
    return atoms


def brute_force_lmo(
    candidates: Any,
    g: Any,
    samples: int = 20000,
    seed: int = 0,
) -> LmoResult:
    """
    Minimize <s, g> by enumeration.

    Args:
        candidates: A constraint set with a finite vertex list, a NuclearBall
            with d <= 6 (sampled rank-one atoms), or an explicit list of atoms.
        g: Gradient (vector or matrix).
        samples: Number of sampled atoms for the nuclear ball.
        seed: Seed of the atom sampler.

    Returns:
        LmoResult: The first atom attaining the minimum.
    """
    g = np.asarray(g, dtype=np.float64)
    if isinstance(candidates, NuclearBall):
        atoms = _sampled_rank_one(candidates, samples, seed)
    elif isinstance(candidates, ConstraintSet):
        atoms = enumerate_vertices(candidates)
    else:
        atoms = [np.asarray(a, dtype=np.float64) for a in candidates]
    if not atoms:
        raise InvalidArgumentError("no atoms to enumerate")
    values = np.array([float(np.sum(a * g)) for a in atoms])
    best = int(np.argmin(values))
    return LmoResult(s=atoms[best], inner_value=float(values[best]), index=best)


def with_long_run_reference(instance: ProblemInstance, T: int) -> ProblemInstance:
    """
    Tighten the reference with an exact Frank-Wolfe run of reference_run_factor * T steps.

    The smaller of the current reference and the best value seen is kept; the
    provenance becomes long_run only when the run improved on it.
    """
    from qfw.fw_engine import exact_fw_run

    steps = int(get_solver_config()["reference_run_factor"]) * int(T)
    trace = exact_fw_run(
        instance.objective, instance.constraint_set, steps, gradient_fn=instance.gradient_callback
    )
    best = min(r.f_value for r in trace.records)
    if best < instance.reference_optimum:
        logger.info(f"Long reference run improved f* from {instance.reference_optimum:.6g} to {best:.6g}")
        return replace(instance, reference_optimum=best, provenance="long_run")
    return instance
