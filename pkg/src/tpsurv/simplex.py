"""Dense two-phase simplex method with Bland's anti-cycling rule.

Solves ``min c'x  s.t.  A x = b, x >= 0``.  Problems here have at most a few
dozen rows, so a plain tableau is enough.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
DEGENERATE = "degenerate"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    fun: float
    phase_one_objective: float
    iterations: int

    @property
    def feasible(self) -> bool:
        return self.status in (OPTIMAL, UNBOUNDED)


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _iterate(T, basis, allowed, tol, max_iter):
    """Run Bland-rule pivots on tableau ``T`` (objective in the last row).

    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        cost = T[-1, :-1]
        entering = next((j for j in allowed if cost[j] < -tol), None)
        if entering is None:
            return OPTIMAL, it
        col = T[:m, entering]
        pos = col > tol
        if not np.any(pos):
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        # Bland: among tied rows pick the one whose basic variable has the smallest index
        tied = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = min(tied, key=lambda r: basis[r])
        _pivot(T, row, entering)
        basis[row] = entering
    return ITERATION_LIMIT, max_iter


def simplex(c, A_eq, b_eq, tol: float = 1e-9, max_iter: int = 5000) -> LPResult:
    """Two-phase simplex for ``min c'x, A x = b, x >= 0``.

    ``status`` is one of ``optimal``, ``infeasible``, ``unbounded``,
    ``iteration_limit`` or ``degenerate`` (phase one ended with an
    objective too close to zero to call either way).
    """
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    scale = max(1.0, float(np.abs(b).max(initial=0.0)), float(np.abs(A).max(initial=0.0)))
    feas_tol = 1e-9 * scale * max(m, 1)

    # phase one: artificial variables n..n+m-1 start in the basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    status, it1 = _iterate(T, basis, range(n + m), tol, max_iter)
    w = -T[-1, -1]
    if status == ITERATION_LIMIT:
        return LPResult(ITERATION_LIMIT, None, np.nan, w, it1)
    if w > 1e3 * feas_tol:
        return LPResult(INFEASIBLE, None, np.nan, w, it1)
    if w > feas_tol:
        return LPResult(DEGENERATE, None, np.nan, w, it1)

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            j = next((j for j in range(n) if abs(T[r, j]) > tol), None)
            if j is None:
                continue
            _pivot(T, r, j)
            basis[r] = j
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros(n + 1)])
    basis = [basis[r] for r in keep]

    # phase two
    T[-1, :n] = c
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status, it2 = _iterate(T, basis, range(n), tol, max_iter)
    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    fun = float(c @ x)
    if status == UNBOUNDED:
        fun = -np.inf
    return LPResult(status, x, fun, w, it1 + it2)


def box_feasibility(X, lower, upper, **kw) -> LPResult:
    """Is there ``eta`` with ``lower <= X eta <= upper``?

    ``eta`` is split as ``eta+ - eta-`` and slacks turn the two-sided bounds
    into equalities; the zero objective makes phase one the whole test.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    I = np.eye(n)
    Z = np.zeros((n, n))
    A = np.block([[X, -X, -I, Z], [X, -X, Z, I]])
    b = np.concatenate([lower, upper])
    res = simplex(np.zeros(2 * p + 2 * n), A, b, **kw)
    if res.x is not None:
        res.x = res.x[:p] - res.x[p:2 * p]
    return res
