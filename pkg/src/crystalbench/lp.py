"""Dense two-phase revised simplex for small equality-form LPs.

    minimise c @ x  subject to  A @ x = b,  x >= 0

The row count is small (one row per element of a chemical system) while the
column count can reach thousands, so the basis is re-solved from scratch each
pivot rather than updated. Pivoting uses Dantzig's rule and switches to
Bland's rule after a degenerate step, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-10
OPT_TOL = 1e-12
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    objective: float
    x: np.ndarray
    basis: tuple[int, ...]
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _simplex(A, b, c, basis, allowed, max_iter):
    """Run primal simplex from a feasible basis. Returns (status, basis, iterations)."""
    m = A.shape[0]
    bland = False
    for it in range(max_iter):
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        r = c - A.T @ y
        r[basis] = 0.0
        r[~allowed] = 0.0
        cand = np.flatnonzero(r < -OPT_TOL)
        if cand.size == 0:
            return "optimal", basis, it
        q = int(cand[0]) if bland else int(cand[np.argmin(r[cand])])
        d = np.linalg.solve(B, A[:, q])
        pos = d > PIVOT_TOL
        if not pos.any():
            return "unbounded", basis, it
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-15)
        # leaving variable: smallest column index among ties
        leave = int(ties[np.argmin(np.asarray(basis)[ties])])
        bland = best <= FEAS_TOL
        basis = list(basis)
        basis[leave] = q
    return "iteration_limit", basis, max_iter


def solve_lp(c, A, b, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).copy()
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("shape mismatch between c, A and b")
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1 on [A | I] with artificial costs
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, bool)
    status, basis, it1 = _simplex(A1, b, c1, basis, allowed, max_iter)
    if status != "optimal":
        return LPResult(status, np.nan, np.full(n, np.nan), tuple(basis), it1)
    xB = np.linalg.solve(A1[:, basis], b)
    if float(c1[basis] @ xB) > FEAS_TOL * max(1.0, float(np.abs(b).sum())):
        return LPResult("infeasible", np.nan, np.full(n, np.nan), tuple(basis), it1)

    # drive zero-level artificials out of the basis; drop constraints that are redundant
    drop_rows, drop_pos = [], []
    for pos in range(m):
        if basis[pos] < n:
            continue
        row = np.linalg.solve(A1[:, basis].T, np.eye(m)[pos]) @ A
        row[[j for j in basis if j < n]] = 0.0
        cols = np.flatnonzero(np.abs(row) > 1e-9)
        if cols.size:
            basis[pos] = int(cols[0])
        else:
            drop_rows.append(basis[pos] - n)
            drop_pos.append(pos)
    keep = [k for k in range(m) if k not in drop_rows]
    basis = [j for p, j in enumerate(basis) if p not in drop_pos]
    A2 = A[keep]
    b2 = b[keep]

    allowed = np.ones(n, bool)
    status, basis, it2 = _simplex(A2, b2, c, basis, allowed, max_iter)
    x = np.zeros(n)
    xB = np.linalg.solve(A2[:, basis], b2)
    x[basis] = xB
    obj = float(c[basis] @ xB)
    return LPResult(status, obj if status == "optimal" else np.nan, x, tuple(basis), it1 + it2)
