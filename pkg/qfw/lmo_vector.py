#!/usr/bin/env python
"""
Linear minimization oracles over the vector constraint sets.

Exact oracles scan the gradient. Emulated oracles feed estimated values to a
classical emulation of quantum maximum finding, which reproduces the threshold
search of the quantum routine and charges its query budget.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from qfw.domain import (
    ErrorMode,
    ErrorModel,
    QueryLedger,
    SmoothObjective,
    Vector,
    as_vector,
    dual_exponent,
)
from qfw.errors import InvalidArgumentError
from qfw.oracles import bounded_error_inject, forward_differences, signs

logger = logging.getLogger("lmo_vector")

Accessor = Union[Callable[[int], float], Sequence[float], np.ndarray]


@dataclass(frozen=True)
class LmoResult:
    """Direction returned by an LMO, with its certified additive slack."""

    s: np.ndarray
    inner_value: float
    additive_slack_bound: float = 0.0
    charged_queries: int = 0
    index: Optional[int] = None
    # None: certified against gamma_t C_f / 2
    slack_budget: Optional[float] = None

    def __post_init__(self) -> None:
        if self.additive_slack_bound < 0:
            raise InvalidArgumentError("additive slack bound must be nonnegative")
        if self.slack_budget is not None and self.slack_budget < 0:
            raise InvalidArgumentError("slack budget must be nonnegative")


@dataclass(frozen=True)
class MaxFindResult:
    """Outcome of one emulated maximum-finding call."""

    index: int
    charged_queries: int
    repetitions: int
    budget: int
    rounds_cost: int


# --- Exact oracles ---


def exact_lmo_l1(g: Any, tau: float = 1.0) -> LmoResult:
    """Vertex -tau sign(g_i) e_i at the largest |g_i| (lowest index on ties)."""
    if not tau > 0:
        raise InvalidArgumentError(f"radius must be positive, got {tau}")
    g = as_vector(g, "g")
    i = int(np.argmax(np.abs(g)))
    s = np.zeros_like(g)
    s[i] = -tau * signs(g)[i]
    return LmoResult(s=s, inner_value=float(s @ g), index=i)


def exact_lmo_simplex(g: Any) -> LmoResult:
    """Vertex e_i at the smallest g_i (lowest index on ties)."""
    g = as_vector(g, "g")
    i = int(np.argmin(g))
    s = np.zeros_like(g)
    s[i] = 1.0
    return LmoResult(s=s, inner_value=float(g[i]), index=i)


def group_dual_norm(g: Any, groups: Sequence[Sequence[int]], p_norms: Sequence[float]) -> Tuple[float, int]:
    """
    Dual of the latent group norm: max over groups of the l_q norm of the restriction.

    Returns:
        tuple: (value, index of the first group attaining it)
    """
    g = as_vector(g, "g")
    values = group_dual_values(g, groups, p_norms)
    best = int(np.argmax(values))
    return float(values[best]), best


def group_dual_values(g: Vector, groups: Sequence[Sequence[int]], p_norms: Sequence[float]) -> Vector:
    if len(groups) != len(p_norms):
        raise InvalidArgumentError(f"{len(groups)} groups but {len(p_norms)} p-norms")
    return np.array(
        [np.linalg.norm(g[list(group)], ord=dual_exponent(p)) for group, p in zip(groups, p_norms)]
    )


def group_atom(g: Vector, group: Sequence[int], p: float, radius: float = 1.0) -> Vector:
    """
    Minimizer of <s, g> over radius * (unit l_p ball supported on `group`).

    Finite q uses s_j proportional to -sgn(g_j)|g_j|^(q-1); p = 1 puts the whole
    mass on the largest |g_j|; p = inf takes the negative sign pattern.
    """
    q = dual_exponent(p)
    idx = np.asarray(list(group), dtype=int)
    y = g[idx]
    s = np.zeros_like(g)
    if not np.any(y):
        s[idx[0]] = -radius
        return s
    if math.isinf(q):
        j = int(np.argmax(np.abs(y)))
        s[idx[j]] = -radius * signs(y)[j]
    elif q == 1:
        s[idx] = -radius * np.sign(y)
    else:
        w = np.sign(y) * np.abs(y) ** (q - 1.0)
        s[idx] = -radius * w / np.linalg.norm(w, ord=p)
    return s


def exact_lmo_group(
    g: Any, groups: Sequence[Sequence[int]], p_norms: Sequence[float], radius: float = 1.0
) -> LmoResult:
    """Exact LMO of the latent group norm ball: the dual atom of the best group."""
    g = as_vector(g, "g")
    _, best = group_dual_norm(g, groups, p_norms)
    s = group_atom(g, groups[best], p_norms[best], radius)
    return LmoResult(s=s, inner_value=float(s @ g), index=best)


# --- Maximum finding ---


def max_find_budget(n: int) -> int:
    """Per-repetition query budget ceil(22.5 sqrt(n) + 1.4 log2(n))."""
    if n < 1:
        raise InvalidArgumentError("maximum finding over an empty domain")
    return int(math.ceil(22.5 * math.sqrt(n) + 1.4 * math.log2(n)))


def max_find_repetitions(delta_fail: float) -> int:
    if not 0 < delta_fail < 1:
        raise InvalidArgumentError(f"failure probability must be in (0, 1), got {delta_fail}")
    return max(1, int(math.ceil(math.log2(1.0 / delta_fail))))


def duerr_hoyer_max_find(
    noisy_values: Accessor,
    d: int,
    delta_fail: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
    cost_per_query: int = 1,
) -> MaxFindResult:
    """
    Emulated quantum maximum finding over an indexed accessor.

    Each repetition starts from a random threshold index and repeatedly jumps to
    a uniformly random index whose value beats the threshold. A round with m
    such indices costs ceil(sqrt(d / m)) queries, and a repetition stops once
    nothing beats the threshold or the next round would overrun the budget.
    The best index over all repetitions is returned; equal values resolve to
    the lowest index.

    Args:
        noisy_values: Callable i -> value, or an array of d values.
        d: Domain size.
        delta_fail: Failure probability in (0, 1); sets the repetition count.
        model: Error model; supplies the generator when rng is omitted.
        rng: Run-level generator.
        ledger: Charged with budget * repetitions * cost_per_query function queries.
        cost_per_query: Oracle queries behind one value access.

    Returns:
        MaxFindResult: Chosen index and the charged query count.
    """
    d = int(d)
    budget = max_find_budget(d)
    repetitions = max_find_repetitions(delta_fail)
    if callable(noisy_values):
        values = np.array([float(noisy_values(i)) for i in range(d)])
    else:
        values = np.asarray(noisy_values, dtype=np.float64)
        if values.shape != (d,):
            raise InvalidArgumentError(f"expected {d} values, got shape {values.shape}")
    rng = rng if rng is not None else model.generator("duerr-hoyer", d)

    best = -1
    rounds_cost = 0
    for _ in range(repetitions):
        threshold = int(rng.integers(d))
        spent = 0
        while True:
            marked = np.flatnonzero(values > values[threshold])
            if marked.size == 0:
                break
            round_cost = int(math.ceil(math.sqrt(d / marked.size)))
            if spent + round_cost > budget:
                break
            spent += round_cost
            threshold = int(marked[rng.integers(marked.size)])
        rounds_cost += spent
        if best < 0 or values[threshold] > values[best]:
            best = threshold

    index = int(np.flatnonzero(values == values[best])[0])
    charged = budget * repetitions * int(cost_per_query)
    if ledger is not None:
        ledger.charge_function_queries(charged)
    return MaxFindResult(
        index=index,
        charged_queries=charged,
        repetitions=repetitions,
        budget=budget,
        rounds_cost=rounds_cost,
    )


# --- Emulated oracles ---


def estimate_coordinates(
    objective: SmoothObjective,
    x: Vector,
    sigma: float,
    model: ErrorModel,
    target: str = "abs",
) -> Vector:
    """
    Values the quantum maximum finder reads, one per coordinate.

    These are the forward differences at step sigma. Worst-case mode replaces
    them by the exact gradient pushed adversarially to the per-coordinate bound
    sqrt(d) L sigma / 2; exact mode reads the exact gradient when available.
    Access cost is charged by the maximum finder, not here.
    """
    if model.mode is ErrorMode.WORST_CASE and objective.has_gradient:
        eps = math.sqrt(x.size) * objective.smoothness * sigma / 2.0
        return bounded_error_inject(objective.gradient(x), eps, model, target=target)
    if model.is_exact and objective.has_gradient:
        return as_vector(objective.gradient(x), "gradient")
    return forward_differences(objective, x, sigma)


def _fd_slack(objective: SmoothObjective, d: int, sigma: float) -> float:
    return math.sqrt(d) * objective.smoothness * sigma


def qlmo_l1(
    objective: SmoothObjective,
    x: Any,
    sigma: float,
    tau: float,
    delta_fail: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> LmoResult:
    """Emulated quantum LMO over the l1 ball via maximum finding on |g_i|."""
    if not sigma > 0:
        raise InvalidArgumentError(f"finite-difference step must be positive, got {sigma}")
    if not tau > 0:
        raise InvalidArgumentError(f"radius must be positive, got {tau}")
    x = as_vector(x, "x")
    g = estimate_coordinates(objective, x, sigma, model, target="abs")
    found = duerr_hoyer_max_find(np.abs(g), x.size, delta_fail, model, rng=rng, ledger=ledger, cost_per_query=2)
    s = np.zeros_like(x)
    s[found.index] = -tau * signs(g)[found.index]
    return LmoResult(
        s=s,
        inner_value=float(s @ g),
        additive_slack_bound=tau * _fd_slack(objective, x.size, sigma),
        charged_queries=found.charged_queries,
        index=found.index,
    )


def qlmo_simplex(
    objective: SmoothObjective,
    x: Any,
    sigma: float,
    delta_fail: float,
    model: ErrorModel,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> LmoResult:
    """Emulated quantum LMO over the simplex via maximum finding on -g_i."""
    if not sigma > 0:
        raise InvalidArgumentError(f"finite-difference step must be positive, got {sigma}")
    x = as_vector(x, "x")
    g = estimate_coordinates(objective, x, sigma, model, target="min")
    found = duerr_hoyer_max_find(-g, x.size, delta_fail, model, rng=rng, ledger=ledger, cost_per_query=2)
    s = np.zeros_like(x)
    s[found.index] = 1.0
    return LmoResult(
        s=s,
        inner_value=float(g[found.index]),
        additive_slack_bound=_fd_slack(objective, x.size, sigma),
        charged_queries=found.charged_queries,
        index=found.index,
    )


def group_slack_factor(groups: Sequence[Sequence[int]], p_norms: Sequence[float]) -> float:
    """max_i |g_i|^(1/p_i), with 1/inf = 0."""
    return max(
        len(group) ** (0.0 if math.isinf(p) else 1.0 / p) for group, p in zip(groups, p_norms)
    )


def group_adversarial_inject(
    g_true: Any, eps: float, groups: Sequence[Sequence[int]], p_norms: Sequence[float]
) -> Vector:
    """
    Worst-case perturbation against the group with the largest dual value.

    Coordinates of that group shrink toward zero by eps (stopping at zero) and
    every other coordinate grows away from zero by eps, so no coordinate moves
    by more than eps.
    """
    if not eps >= 0 or not math.isfinite(eps):
        raise InvalidArgumentError(f"error bound must be nonnegative, got {eps}")
    g = as_vector(g_true, "g_true")
    _, leader = group_dual_norm(g, groups, p_norms)
    members = np.zeros(g.size, dtype=bool)
    members[list(groups[leader])] = True
    out = g + signs(g) * eps
    out[members] = np.sign(g[members]) * np.maximum(np.abs(g[members]) - eps, 0.0)
    return out


def qlmo_group(
    objective: SmoothObjective,
    x: Any,
    sigma: float,
    delta_fail: float,
    groups: Sequence[Sequence[int]],
    p_norms: Sequence[float],
    model: ErrorModel,
    radius: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> LmoResult:
    """
    Emulated quantum LMO over the latent group norm ball.

    Maximum finding runs over the per-group dual norms; reading one group costs
    2 |g|_max function queries. Group index lists are read for free. Worst-case
    mode attacks the group holding the largest dual value.
    """
    if not sigma > 0:
        raise InvalidArgumentError(f"finite-difference step must be positive, got {sigma}")
    x = as_vector(x, "x")
    if model.mode is ErrorMode.WORST_CASE and objective.has_gradient:
        eps = math.sqrt(x.size) * objective.smoothness * sigma / 2.0
        g = group_adversarial_inject(objective.gradient(x), eps, groups, p_norms)
    else:
        g = estimate_coordinates(objective, x, sigma, model)
    values = group_dual_values(g, groups, p_norms)
    max_size = max(len(group) for group in groups)
    found = duerr_hoyer_max_find(
        values, len(groups), delta_fail, model, rng=rng, ledger=ledger, cost_per_query=2 * max_size
    )
    s = group_atom(g, groups[found.index], p_norms[found.index], radius)
    return LmoResult(
        s=s,
        inner_value=float(s @ g),
        additive_slack_bound=radius * _fd_slack(objective, x.size, sigma) * group_slack_factor(groups, p_norms),
        charged_queries=found.charged_queries,
        index=found.index,
    )


SparseAtom = Sequence[Tuple[int, float]]


def atoms_to_dense(atoms: Sequence[SparseAtom], dim: int) -> np.ndarray:
    """Stack (index, value) atoms as rows of an N x d array."""
    dense = np.zeros((len(atoms), dim))
    for row, atom in enumerate(atoms):
        for j, value in atom:
            if not 0 <= int(j) < dim:
                raise InvalidArgumentError(f"atom {row} has index {j} outside [0, {dim})")
            dense[row, int(j)] += float(value)
    return dense


def sparse_atom_lmo(
    atoms: Sequence[SparseAtom],
    g: Any,
    delta_fail: float,
    model: ErrorModel,
    sparsity: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[QueryLedger] = None,
) -> LmoResult:
    """
    LMO over the convex hull of a finite set of sparse atoms.

    Maximum finding runs over -<a_j, g>; each inner product touches at most
    `sparsity` gradient entries and is charged that many queries.
    """
    if not atoms:
        raise InvalidArgumentError("sparse atom LMO needs at least one atom")
    g = as_vector(g, "g")
    counts: List[int] = [len(atom) for atom in atoms]
    tau = int(sparsity) if sparsity is not None else max(counts)
    too_dense = [row for row, count in enumerate(counts) if count > tau]
    if too_dense:
        raise InvalidArgumentError(f"atoms {too_dense} have more than {tau} nonzeros")

    dense = atoms_to_dense(atoms, g.size)
    products = dense @ g
    found = duerr_hoyer_max_find(-products, len(atoms), delta_fail, model, rng=rng, ledger=ledger, cost_per_query=tau)
    return LmoResult(
        s=dense[found.index].copy(),
        inner_value=float(products[found.index]),
        charged_queries=found.charged_queries,
        index=found.index,
    )
