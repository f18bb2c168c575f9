"""Brute-force transportation-LP oracle, independent of the simplex solver.

Every vertex of the transportation polytope is the basic solution of some
spanning tree of the complete bipartite graph K_{n,m}; the LP optimum is
attained at a vertex.  The oracle enumerates all spanning trees, solves
each basic system by leaf elimination, discards infeasible (negative)
vertices, and minimizes the objective over the rest.  Exponential in N;
intended for N <= 4 where K_{4,4} has 4096 trees.
"""

from functools import lru_cache
from itertools import combinations

import numpy as np

FEASIBILITY_TOL = 1e-10


@lru_cache(maxsize=None)
def _tree_schedules(n: int, m: int):
    """All spanning trees of K_{n,m}, each as a leaf-elimination schedule.

    A schedule is a tuple of (i, j, leaf_node, other_node) steps; nodes are
    encoded 0..n-1 for rows and n..n+m-1 for columns.  Processing steps in
    order with residual supplies/demands yields the tree's basic solution.
    """
    arcs = [(i, j) for i in range(n) for j in range(m)]
    n_nodes = n + m
    schedules = []
    for subset in combinations(range(len(arcs)), n_nodes - 1):
        # Union-find acyclicity check; n_nodes-1 acyclic edges = spanning tree.
        parent = list(range(n_nodes))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        is_tree = True
        for k in subset:
            i, j = arcs[k]
            ra, rb = find(i), find(n + j)
            if ra == rb:
                is_tree = False
                break
            parent[ra] = rb
        if not is_tree:
            continue

        # Leaf elimination order is a property of the tree alone.
        degree = [0] * n_nodes
        adjacency: list[list[int]] = [[] for _ in range(n_nodes)]
        for k in subset:
            i, j = arcs[k]
            degree[i] += 1
            degree[n + j] += 1
            adjacency[i].append(k)
            adjacency[n + j].append(k)
        removed = [False] * len(arcs)
        leaves = [node for node in range(n_nodes) if degree[node] == 1]
        schedule = []
        while leaves:
            leaf = leaves.pop()
            arc_k = next(k for k in adjacency[leaf] if not removed[k])
            removed[arc_k] = True
            i, j = arcs[arc_k]
            other = (n + j) if leaf == i else i
            schedule.append((i, j, leaf, other))
            degree[leaf] -= 1
            degree[other] -= 1
            if degree[other] == 1:
                leaves.append(other)
            if len(schedule) == n_nodes - 1:
                break
        schedules.append(tuple(schedule))
    return tuple(schedules)


def spanning_tree_count(n: int, m: int) -> int:
    return len(_tree_schedules(n, m))


def min_cost_by_enumeration(
    cost: np.ndarray, supply: np.ndarray, demand: np.ndarray
) -> tuple[float, np.ndarray]:
    """Exact LP optimum by vertex enumeration.

    Returns (best objective, one optimal vertex as an (n, m) allocation).
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    cost_rows = cost.tolist()
    marginals = list(np.concatenate([supply, demand]))

    best_obj = np.inf
    best_schedule = None
    for schedule in _tree_schedules(n, m):
        residual = marginals.copy()
        objective = 0.0
        feasible = True
        for i, j, leaf, other in schedule:
            q = residual[leaf]
            if q < -FEASIBILITY_TOL:
                feasible = False
                break
            residual[leaf] = 0.0
            residual[other] -= q
            objective += q * cost_rows[i][j]
        if feasible and objective < best_obj:
            best_obj = objective
            best_schedule = schedule

    if best_schedule is None:
        raise ValueError("no feasible vertex found; marginals are inconsistent")

    alloc = np.zeros((n, m))
    residual = marginals.copy()
    for i, j, leaf, other in best_schedule:
        q = residual[leaf]
        residual[leaf] = 0.0
        residual[other] -= q
        alloc[i, j] = q
    return best_obj, np.maximum(alloc, 0.0)
