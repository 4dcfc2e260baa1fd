"""Exact discrete optimal transport and optimal assignment at desk scale.

Couplings are computed exactly: square problems with uniform marginals are
dispatched to the Hungarian algorithm, everything else to an exact LP
(HiGHS).  Entropic regularization is deliberately not offered; at a few
hundred atoms the exact solvers are fast and keep the property tests crisp.

Cost matrices and permutations are plain numpy arrays; a permutation is a
length-C integer array ``sigma`` with ``sigma[i]`` the column matched to
row ``i``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, InvalidMarginal, NonSquare, TooLarge

# Absolute tolerance on marginal sums and coupling feasibility.
MARGINAL_TOL = 1e-9
# Exhaustive enumeration is capped at 8! = 40320 permutations.
BRUTE_FORCE_LIMIT = 8

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling with prescribed marginals and its cost.

    ``coupling`` is n x m with row sums ``row_marginal`` and column sums
    ``col_marginal`` (within ``MARGINAL_TOL``); ``objective`` is the
    transport cost <C, P>.
    """

    coupling: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    objective: float


def _as_cost(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise DimensionMismatch(f"cost must be a nonempty 2-D array, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidMarginal("cost entries must be finite")
    if np.any(c < 0):
        raise InvalidMarginal("cost entries must be nonnegative")
    return c


def _as_marginal(v, size: int, name: str) -> np.ndarray:
    w = np.asarray(v, dtype=float).ravel()
    if w.shape[0] != size:
        raise DimensionMismatch(f"{name} has length {w.shape[0]}, cost expects {size}")
    if np.any(w < 0):
        raise InvalidMarginal(f"{name} has a negative entry")
    total = w.sum()
    if abs(total - 1.0) > MARGINAL_TOL:
        raise InvalidMarginal(f"{name} sums to {total!r}, expected 1 within {MARGINAL_TOL}")
    # Sub-tolerance drift is renormalized so feasibility checks stay exact.
    return w / total


def _is_uniform(v: np.ndarray) -> bool:
    return bool(np.max(np.abs(v - 1.0 / v.shape[0])) < 1e-12)


def solve_discrete_ot(cost, a, b) -> TransportPlan:
    """Solve min_{P in Pi(a, b)} <C, P> exactly.

    Zero-mass atoms are dropped before solving and restored as zero
    rows/columns of the returned coupling.
    """
    c = _as_cost(cost)
    n, m = c.shape
    a = _as_marginal(a, n, "row marginal")
    b = _as_marginal(b, m, "column marginal")

    if n == m and _is_uniform(a) and _is_uniform(b):
        rows = np.arange(n)
        cols = linear_sum_assignment(c)[1]
        coupling = np.zeros((n, m))
        coupling[rows, cols] = 1.0 / n
        return TransportPlan(coupling, a, b, float(c[rows, cols].sum() / n))

    keep_rows = np.flatnonzero(a > 0)
    keep_cols = np.flatnonzero(b > 0)
    sub = c[np.ix_(keep_rows, keep_cols)]
    plan_sub = _solve_lp(sub, a[keep_rows], b[keep_cols])
    coupling = np.zeros((n, m))
    coupling[np.ix_(keep_rows, keep_cols)] = plan_sub
    return TransportPlan(coupling, a, b, float(np.sum(c * coupling)))


def _solve_lp(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    var = np.arange(n * m)
    row_of = np.repeat(np.arange(n), m)
    col_of = np.tile(np.arange(m), n)
    constraints = sp.csr_matrix(
        (np.ones(2 * n * m), (np.concatenate([row_of, n + col_of]), np.concatenate([var, var]))),
        shape=(n + m, n * m),
    )
    # The last column constraint is implied by the others (total mass one).
    res = linprog(
        cost.ravel(),
        A_eq=constraints[: n + m - 1],
        b_eq=np.concatenate([a, b[:-1]]),
        bounds=(0, None),
        method="highs",
        options=_LP_OPTIONS,
    )
    if res.status != 0:
        raise RuntimeError(f"LP solver failed (status {res.status}): {res.message}")
    return np.maximum(res.x.reshape(n, m), 0.0)


def optimal_assignment(cost) -> np.ndarray:
    """Permutation minimizing sum_i cost[i, sigma(i)].

    Equivalent to the uniform-marginal transport problem whose solution is a
    scaled permutation matrix.  Among tied optima the lexicographically
    smallest mapping is returned, so results are deterministic.
    """
    c = _as_cost(cost)
    n, m = c.shape
    if n != m:
        raise NonSquare(f"assignment needs a square cost, got {n}x{m}")
    rows, cols = linear_sum_assignment(c)
    best = float(c[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best))

    mapping = np.empty(n, dtype=int)
    remaining = list(range(n))
    prefix = 0.0
    for i in range(n):
        for j in remaining:  # ascending: remaining stays sorted
            rest_cols = [k for k in remaining if k != j]
            completion = 0.0
            if rest_cols:
                sub = c[np.ix_(range(i + 1, n), rest_cols)]
                rr, cc = linear_sum_assignment(sub)
                completion = float(sub[rr, cc].sum())
            if prefix + c[i, j] + completion <= best + tol:
                mapping[i] = j
                prefix += float(c[i, j])
                remaining.remove(j)
                break
    return mapping


def brute_force_assignment(cost) -> tuple[np.ndarray, float]:
    """Exact minimizer by exhaustive enumeration (test oracle, C <= 8).

    Ties are broken by lexicographic order of the mapping.
    """
    c = _as_cost(cost)
    n, m = c.shape
    if n != m:
        raise NonSquare(f"assignment needs a square cost, got {n}x{m}")
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"enumeration capped at C <= {BRUTE_FORCE_LIMIT}, got {n}")
    idx = np.arange(n)
    best_perm = None
    best_cost = np.inf
    for perm in itertools.permutations(range(n)):
        total = float(c[idx, perm].sum())
        if total < best_cost:
            best_cost = total
            best_perm = perm
    return np.array(best_perm, dtype=int), best_cost


def check_cyclical_monotonicity(cost) -> bool:
    """True iff the identity pairing minimizes total cost over all permutations.

    Ties count as satisfying the relation.  This is the sufficient condition
    under which optimal assignment pairs row i with column i.
    """
    c = _as_cost(cost)
    n, m = c.shape
    if n != m:
        raise NonSquare(f"cyclical monotonicity needs a square cost, got {n}x{m}")
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"enumeration capped at C <= {BRUTE_FORCE_LIMIT}, got {n}")
    _, best = brute_force_assignment(c)
    identity = float(np.trace(c))
    return identity <= best + 1e-12 * max(1.0, abs(best))


def wasserstein1_empirical(x, y, weights_x=None, weights_y=None) -> float:
    """Exact W1 between two weighted point sets under Euclidean ground cost."""
    px = np.atleast_2d(np.asarray(x, dtype=float))
    py = np.atleast_2d(np.asarray(y, dtype=float))
    if px.shape[1] != py.shape[1]:
        raise DimensionMismatch(f"point dims differ: {px.shape[1]} vs {py.shape[1]}")
    wx = np.full(px.shape[0], 1.0 / px.shape[0]) if weights_x is None else weights_x
    wy = np.full(py.shape[0], 1.0 / py.shape[0]) if weights_y is None else weights_y
    plan = solve_discrete_ot(cdist(px, py), wx, wy)
    return plan.objective
