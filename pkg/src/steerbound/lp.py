"""Dense equality-form linear programming with certified optima.

Solves  maximize c.x  subject to  A x = b, x >= 0  by two-phase revised
simplex. The problems behind the symmetric bounds are tiny and dense (at
most a few rows and at most 2^16 columns), so a dense implementation with
explicit basis solves is both fast and easy to certify. Pricing uses the
largest-reduced-cost rule with first-index tie-breaking; if the iteration
count suggests cycling the solver falls back to Bland's rule, which cannot
cycle. Every returned optimum carries its dual vector and the primal, dual,
and complementary-slackness residuals; a result that cannot be certified to
1e-9 raises instead of being returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpError", "LpResult", "lp_solve", "CERT_TOL"]

#: certification threshold on every residual
CERT_TOL = 1e-9

_PIVOT_TOL = 1e-11


class LpError(RuntimeError):
    """Infeasible, unbounded, or uncertifiable linear program."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    value: float
    duals: np.ndarray
    residuals: dict
    iterations: int


def _pivot_loop(A, b, c, basis, allowed, bland_after, max_iter):
    """Run simplex iterations in place on the given basis.

    `allowed` marks the columns permitted to enter (used to freeze
    artificial columns out of phase 2). Returns the iteration count.
    """
    m = A.shape[0]
    bland = False
    for it in range(max_iter):
        B = A[:, basis]
        try:
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError as exc:  # singular basis: numerical failure
            raise LpError(f"singular basis at iteration {it}") from exc
        rc = c - y @ A
        rc[basis] = 0.0
        rc[~allowed] = -np.inf

        if bland:
            positive = np.flatnonzero(rc > _PIVOT_TOL)
            if positive.size == 0:
                return it
            j = int(positive[0])
        else:
            j = int(np.argmax(rc))
            if rc[j] <= _PIVOT_TOL:
                return it
        if it >= bland_after:
            bland = True

        d = np.linalg.solve(B, A[:, j])
        xb = np.linalg.solve(B, b)
        move = d > _PIVOT_TOL
        if not np.any(move):
            raise LpError("objective unbounded above")
        ratios = np.full(m, np.inf)
        ratios[move] = xb[move] / d[move]
        best = ratios.min()
        # among tied rows leave the lowest variable index (Bland compatible)
        tied = np.flatnonzero(ratios <= best + 1e-15)
        leave = int(tied[np.argmin(np.asarray(basis)[tied])])
        basis[leave] = j
    raise LpError(f"no convergence within {max_iter} simplex iterations")


def lp_solve(
    objective: np.ndarray,
    constraints: np.ndarray,
    rhs: np.ndarray,
    *,
    max_iterations: int | None = None,
) -> LpResult:
    """Maximize objective.x subject to constraints @ x = rhs and x >= 0.

    Returns the optimal vertex, its value, the dual vector, and the
    certification residuals. Raises LpError when the program is infeasible
    or unbounded, or when the optimum cannot be certified to CERT_TOL.
    """
    A = np.ascontiguousarray(constraints, dtype=float)
    c = np.asarray(objective, dtype=float).reshape(-1)
    b = np.asarray(rhs, dtype=float).reshape(-1).copy()
    if A.ndim != 2 or A.shape != (b.shape[0], c.shape[0]):
        raise LpError(
            f"shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}"
        )
    m, n = A.shape

    flip = b < 0.0
    if np.any(flip):
        A = A.copy()
        A[flip] *= -1.0
        b[flip] *= -1.0

    if max_iterations is None:
        max_iterations = 200 + 50 * (m + 1) + 2 * n
    bland_after = 100 + 20 * m

    # phase 1: artificial identity basis, drive sum of artificials to zero
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), -np.ones(m)])
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    it1 = _pivot_loop(A1, b, c1, basis, allowed, bland_after, max_iterations)
    xb = np.linalg.solve(A1[:, basis], b)
    if float(c1[basis] @ xb) < -1e-9:
        raise LpError("constraints are infeasible")

    # pivot leftover artificials (stuck at zero) out where a real column can
    # replace them; a row with no replacement is redundant and its
    # artificial stays pinned at zero
    for i in range(m):
        if basis[i] < n:
            continue
        B = A1[:, basis]
        in_basis = np.zeros(n, dtype=bool)
        for j in basis:
            if j < n:
                in_basis[j] = True
        row = np.linalg.solve(B.T, np.eye(m)[i]) @ A  # pivot row over real columns
        row[in_basis] = 0.0
        candidates = np.flatnonzero(np.abs(row) > 1e-9)
        if candidates.size:
            basis[i] = int(candidates[0])

    # phase 2: real objective, artificials frozen
    allowed[n:] = False
    c2 = np.concatenate([c, np.zeros(m)])
    it2 = _pivot_loop(A1, b, c2, basis, allowed, bland_after, max_iterations)

    B = A1[:, basis]
    xb = np.linalg.solve(B, b)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = xb[i]
    y = np.linalg.solve(B.T, c2[basis])
    value = float(c @ x)

    rc = c - y @ A
    residuals = {
        "primal": float(np.max(np.abs(A @ x - b))) if m else 0.0,
        "dual": float(max(0.0, rc.max())),
        "slackness": float(np.abs(x @ rc).max() if n else 0.0),
        "duality_gap": float(abs(value - y @ b)),
        "negativity": float(max(0.0, -x.min())) if n else 0.0,
    }
    if max(residuals.values()) > CERT_TOL:
        raise LpError(
            f"optimum failed certification: residuals {residuals}", residuals
        )
    # report duals against the caller's row signs, not the normalized ones
    duals = y.copy()
    duals[flip] = -duals[flip]
    return LpResult(x=x, value=value, duals=duals, residuals=residuals, iterations=it1 + it2)
