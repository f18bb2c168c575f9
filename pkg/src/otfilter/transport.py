"""Ensemble resampling through a transportation linear program.

The Bayesian update is realized as a discrete optimal-transport problem:
pairwise costs between the N prior members, a plan T minimizing total
cost subject to column sums 1/N (equal posterior weights) and row sums
w_i (likelihood weights), and the resampling map X+ = X- N T, which makes
every posterior member a convex combination of prior members.

The solver is a dense transportation simplex (MODI / u-v method) on the
bipartite formulation: a least-cost initial basic solution followed by
dual-based pivoting on a spanning-tree basis.  Degeneracy is handled with
zero-allocation basic cells and a switch to Bland's rule after a run of
degenerate pivots, which guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ensemble import Ensemble
from .errors import (
    InvalidPlanError,
    MarginalInfeasibilityError,
    NonconvergenceError,
)

WEIGHT_SUM_TOL = 1e-12
MARGINAL_TOL = 1e-9

# Reduced costs above this (negative) threshold count as optimal.
_REDUCED_COST_TOL = 1e-11
# Consecutive degenerate pivots tolerated before switching to Bland's rule.
_BLAND_TRIGGER_FACTOR = 2


class CostMetric(str, Enum):
    """Pairwise cost between members: plain or squared Euclidean distance."""

    EUCLIDEAN = "euclidean"
    SQUARED_EUCLIDEAN = "sqeuclidean"


@dataclass(frozen=True)
class WeightVector:
    """Normalized nonnegative weights; the row marginals of the transport LP."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.size < 1:
            raise MarginalInfeasibilityError(
                f"weights must be a non-empty 1-D vector, got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise MarginalInfeasibilityError("weights must be finite")
        if np.any(w < 0):
            raise MarginalInfeasibilityError(
                f"weights must be nonnegative (min {w.min():.3e})"
            )
        total = w.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MarginalInfeasibilityError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL:g}, got {total!r}"
            )

    @property
    def size(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise member distances; zero diagonal because prior and weighted
    posterior share sample locations."""

    D: np.ndarray
    metric: CostMetric

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        object.__setattr__(self, "D", D)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
            raise InvalidPlanError(f"cost matrix must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise InvalidPlanError("cost entries must be finite and nonnegative")
        if np.any(np.diag(D) != 0.0):
            raise InvalidPlanError("cost diagonal must be exactly zero")
        if np.max(np.abs(D - D.T)) > 1e-12:
            raise InvalidPlanError("cost matrix must be symmetric within 1e-12")

    @property
    def size(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class TransportPlan:
    """Optimal plan T and its attained objective value."""

    T: np.ndarray
    objective_value: float

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        object.__setattr__(self, "T", T)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise InvalidPlanError(f"plan must be square, got shape {T.shape}")
        n = T.shape[0]
        if np.any(T < 0):
            raise InvalidPlanError(f"plan entries must be nonnegative (min {T.min():.3e})")
        col_err = np.max(np.abs(T.sum(axis=0) - 1.0 / n))
        if col_err > MARGINAL_TOL:
            raise InvalidPlanError(
                f"column sums must equal 1/N within {MARGINAL_TOL:g}, off by {col_err:.3e}"
            )
        if abs(T.sum() - 1.0) > MARGINAL_TOL:
            raise InvalidPlanError("total plan mass must equal 1")

    @property
    def size(self) -> int:
        return self.T.shape[0]


@dataclass(frozen=True)
class PlanDiagnostics:
    """verify_plan report: worst marginal violations and smallest entry."""

    max_column_violation: float
    max_row_violation: float
    min_entry: float
    total_mass_error: float
    passed: bool


def build_cost_matrix(
    ensemble: Ensemble, metric: CostMetric = CostMetric.EUCLIDEAN
) -> CostMatrix:
    """Pairwise distances between all members under the chosen metric."""
    metric = CostMetric(metric)
    m = ensemble.members
    diff = m[:, None, :] - m[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    D = sq if metric is CostMetric.SQUARED_EUCLIDEAN else np.sqrt(sq)
    np.fill_diagonal(D, 0.0)
    return CostMatrix(D=D, metric=metric)


def solve_transport(cost: CostMatrix, weights: WeightVector) -> TransportPlan:
    """Minimize sum_ij t_ij D_ij over plans with row sums w_i, column sums 1/N.

    Rows with exactly zero weight carry no mass and are removed before the
    simplex runs; ties between optimal vertices are broken arbitrarily, so
    callers should rely on the objective value and marginals, not on a
    particular T.
    """
    n = cost.size
    if weights.size != n:
        raise MarginalInfeasibilityError(
            f"weights length {weights.size} does not match cost size {n}"
        )
    supply = weights.w
    demand = np.full(n, 1.0 / n)

    active = supply > 0.0
    if not np.all(active):
        idx = np.flatnonzero(active)
        T = np.zeros((n, n))
        if idx.size == 1:
            # One live row: the column marginals dictate the whole plan.
            T[idx[0]] = demand
        else:
            T[idx, :] = _transportation_simplex(cost.D[idx, :], supply[idx], demand)
    else:
        T = _transportation_simplex(cost.D, supply, demand)

    return _finalize_plan(T, cost.D, supply, demand)


def apply_transport(prior: Ensemble, plan: TransportPlan) -> Ensemble:
    """Resample: posterior member j = N * sum_i prior_i t_ij."""
    if plan.size != prior.size:
        raise InvalidPlanError(
            f"plan size {plan.size} does not match ensemble size {prior.size}"
        )
    posterior = prior.size * (plan.T.T @ prior.members)
    return Ensemble(posterior)


def verify_plan(
    plan: TransportPlan | np.ndarray,
    weights: WeightVector,
    tolerance: float = MARGINAL_TOL,
) -> PlanDiagnostics:
    """Pure diagnostic: measure marginal violations of a plan against weights."""
    T = plan.T if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    n = T.shape[0]
    if weights.size != n:
        raise MarginalInfeasibilityError(
            f"weights length {weights.size} does not match plan size {n}"
        )
    col_violation = float(np.max(np.abs(T.sum(axis=0) - 1.0 / n)))
    row_violation = float(np.max(np.abs(T.sum(axis=1) - weights.w)))
    min_entry = float(T.min())
    mass_error = float(abs(T.sum() - 1.0))
    passed = (
        col_violation <= tolerance
        and row_violation <= tolerance
        and min_entry >= -tolerance
        and mass_error <= tolerance
    )
    return PlanDiagnostics(
        max_column_violation=col_violation,
        max_row_violation=row_violation,
        min_entry=min_entry,
        total_mass_error=mass_error,
        passed=passed,
    )


def _finalize_plan(
    T: np.ndarray, D: np.ndarray, supply: np.ndarray, demand: np.ndarray
) -> TransportPlan:
    """Clamp pivot dust, renormalize column marginals, and re-check feasibility."""
    dust = (T < 0) & (T >= -1e-12)
    if dust.any():
        T[dust] = 0.0
    if np.any(T < 0):
        raise NonconvergenceError(
            "solver produced a negative allocation beyond dust level",
            diagnostics={"min_entry": float(T.min())},
        )
    col = T.sum(axis=0)
    T *= demand / col

    row_violation = float(np.max(np.abs(T.sum(axis=1) - supply)))
    col_violation = float(np.max(np.abs(T.sum(axis=0) - demand)))
    if row_violation > MARGINAL_TOL or col_violation > MARGINAL_TOL:
        raise NonconvergenceError(
            "solver output violates marginals",
            diagnostics={"row_violation": row_violation, "col_violation": col_violation},
        )
    objective = float(np.einsum("ij,ij->", T, D))
    return TransportPlan(T=T, objective_value=objective)


def _initial_basic_solution(
    cost: np.ndarray, supply: np.ndarray, demand: np.ndarray
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Least-cost starting basis: scan cells in cost order, allocate the
    feasible maximum, and close exactly one exhausted line per allocation so
    the basis ends as a spanning tree with n+m-1 cells."""
    n, m = cost.shape
    s = supply.astype(float).copy()
    d = demand.astype(float).copy()
    row_open = np.ones(n, dtype=bool)
    col_open = np.ones(m, dtype=bool)
    open_rows, open_cols = n, m
    alloc = np.zeros((n, m))
    basic: list[tuple[int, int]] = []

    for flat in np.argsort(cost, axis=None, kind="stable"):
        if open_rows + open_cols <= 1:
            break
        i, j = divmod(int(flat), m)
        if not (row_open[i] and col_open[j]):
            continue
        si, dj = s[i], d[j]
        q = si if si <= dj else dj
        alloc[i, j] = q
        basic.append((i, j))
        close_row = si <= dj
        # Never strand one side with lines still open on the other.
        if close_row and open_rows == 1 and open_cols > 1:
            close_row = False
        elif not close_row and open_cols == 1 and open_rows > 1:
            close_row = True
        if close_row:
            s[i] = 0.0
            d[j] = dj - q
            row_open[i] = False
            open_rows -= 1
        else:
            d[j] = 0.0
            s[i] = si - q
            col_open[j] = False
            open_cols -= 1

    return alloc, basic


def _compute_duals(
    cost_rows: list[list[float]],
    row_adj: list[list[int]],
    col_adj: list[list[int]],
    u: np.ndarray,
    v: np.ndarray,
) -> None:
    """Fill dual variables u, v from the basis tree (u[0] anchored at 0)."""
    n = len(row_adj)
    m = len(col_adj)
    row_seen = bytearray(n)
    col_seen = bytearray(m)
    row_seen[0] = 1
    u[0] = 0.0
    stack = [(0, True)]
    while stack:
        idx, is_row = stack.pop()
        if is_row:
            ui = u[idx]
            crow = cost_rows[idx]
            for j in row_adj[idx]:
                if not col_seen[j]:
                    col_seen[j] = 1
                    v[j] = crow[j] - ui
                    stack.append((j, False))
        else:
            vj = v[idx]
            for i in col_adj[idx]:
                if not row_seen[i]:
                    row_seen[i] = 1
                    u[i] = cost_rows[i][idx] - vj
                    stack.append((i, True))


def _tree_path(
    row_adj: list[list[int]],
    col_adj: list[list[int]],
    start_row: int,
    end_col: int,
) -> list[int]:
    """Unique tree path from row node to column node.

    Nodes are encoded as alternating (row, col, row, ...) indices in the
    returned list; the caller knows positions 0, 2, 4, ... are rows.
    """
    n = len(row_adj)
    # parent[node] over the combined node set: rows 0..n-1, cols n..n+m-1
    parent = {start_row: -1}
    stack = [(start_row, True)]
    target = n + end_col
    while stack:
        idx, is_row = stack.pop()
        if is_row:
            for j in row_adj[idx]:
                node = n + j
                if node not in parent:
                    parent[node] = idx
                    if j == end_col:
                        stack.clear()
                        break
                    stack.append((node, False))
        else:
            j = idx - n
            for i in col_adj[j]:
                if i not in parent:
                    parent[i] = idx
                    stack.append((i, True))
    if target not in parent:
        raise NonconvergenceError("basis lost connectivity (internal error)")
    path = [target]
    while path[-1] != start_row:
        path.append(parent[path[-1]])
    path.reverse()
    # Decode column nodes back to column indices.
    return [p if k % 2 == 0 else p - n for k, p in enumerate(path)]


def _transportation_simplex(
    cost: np.ndarray,
    supply: np.ndarray,
    demand: np.ndarray,
    max_iterations: int | None = None,
) -> np.ndarray:
    n, m = cost.shape
    alloc, basic = _initial_basic_solution(cost, supply, demand)
    row_adj: list[list[int]] = [[] for _ in range(n)]
    col_adj: list[list[int]] = [[] for _ in range(m)]
    for i, j in basic:
        row_adj[i].append(j)
        col_adj[j].append(i)

    cost_rows = cost.tolist()
    u = np.empty(n)
    v = np.empty(m)
    reduced = np.empty_like(cost)
    if max_iterations is None:
        max_iterations = 200 * (n + m) + 1000
    bland_trigger = _BLAND_TRIGGER_FACTOR * (n + m)

    degenerate_streak = 0
    use_bland = False
    for _ in range(max_iterations):
        _compute_duals(cost_rows, row_adj, col_adj, u, v)
        np.subtract(cost, u[:, None], out=reduced)
        reduced -= v[None, :]

        if use_bland:
            candidates = np.flatnonzero(reduced.ravel() < -_REDUCED_COST_TOL)
            if candidates.size == 0:
                return alloc
            ei, ej = divmod(int(candidates[0]), m)
        else:
            flat = int(np.argmin(reduced))
            ei, ej = divmod(flat, m)
            if reduced[ei, ej] >= -_REDUCED_COST_TOL:
                return alloc

        path = _tree_path(row_adj, col_adj, ei, ej)
        # Cycle: entering cell (+) then path arcs alternating (-, +, -, ...).
        minus_arcs: list[tuple[int, int]] = []
        plus_arcs: list[tuple[int, int]] = []
        for k in range(len(path) - 1):
            arc = (path[k], path[k + 1]) if k % 2 == 0 else (path[k + 1], path[k])
            (minus_arcs if k % 2 == 0 else plus_arcs).append(arc)

        theta = np.inf
        leaving = minus_arcs[0]
        for arc in minus_arcs:
            a = alloc[arc]
            if a < theta or (a == theta and arc < leaving):
                theta = a
                leaving = arc

        for arc in plus_arcs:
            alloc[arc] += theta
        alloc[ei, ej] += theta
        for arc in minus_arcs:
            alloc[arc] -= theta
        alloc[leaving] = 0.0

        li, lj = leaving
        row_adj[li].remove(lj)
        col_adj[lj].remove(li)
        row_adj[ei].append(ej)
        col_adj[ej].append(ei)

        if theta <= 0.0:
            degenerate_streak += 1
            if degenerate_streak >= bland_trigger:
                use_bland = True
        else:
            degenerate_streak = 0
            use_bland = False

    _compute_duals(cost_rows, row_adj, col_adj, u, v)
    np.subtract(cost, u[:, None], out=reduced)
    reduced -= v[None, :]
    raise NonconvergenceError(
        "transportation simplex hit its iteration limit",
        diagnostics={
            "iterations": max_iterations,
            "most_negative_reduced_cost": float(reduced.min()),
            "size": n,
        },
    )
