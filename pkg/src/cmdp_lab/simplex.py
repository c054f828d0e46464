"""Dense two-phase revised simplex with Bland's rule as anti-cycling fallback.

Solves ``min c @ x`` subject to ``A_eq @ x == b_eq``, ``A_ub @ x <= b_ub``
and ``x >= 0``. Sized for occupancy LPs of a few thousand variables; no
presolve, no sparsity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InfeasibleError(ValueError):
    """The constraint set is empty."""


class UnboundedError(ValueError):
    """The objective is unbounded below on the feasible set."""


class SolverError(RuntimeError):
    """The solver stopped without a certificate (iteration limit, breakdown)."""


@dataclass
class LpProblem:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        for mat, rhs in (("A_eq", "b_eq"), ("A_ub", "b_ub")):
            M = getattr(self, mat)
            if M is None:
                setattr(self, mat, np.zeros((0, n)))
                setattr(self, rhs, np.zeros(0))
                continue
            M = np.atleast_2d(np.asarray(M, dtype=float))
            b = np.atleast_1d(np.asarray(getattr(self, rhs), dtype=float))
            if M.shape[1] != n or M.shape[0] != b.size:
                raise ValueError(f"{mat}/{rhs} dimensions inconsistent with {n} variables")
            setattr(self, mat, M)
            setattr(self, rhs, b)

    @property
    def num_vars(self) -> int:
        return self.c.size


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    iterations: int
    basis: list = field(default_factory=list)


class _Tableau:
    """Revised-simplex state over the standard form ``A x = b, x >= 0``."""

    def __init__(self, A, b, basis, tol, refactor_every, pivot_tol=1e-9, bland_after=50):
        self.A = A
        self.pivot_tol = pivot_tol
        self.bland_after = bland_after
        self.b = b
        self.basis = list(basis)
        self.tol = tol
        self.refactor_every = refactor_every
        self.iterations = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        self.B_inv = np.linalg.inv(B)
        self.x_B = self.B_inv @ self.b
        self.x_B[np.abs(self.x_B) < self.tol] = 0.0

    def pivot(self, row, col, u):
        piv = u[row]
        self.B_inv[row] /= piv
        others = np.arange(len(u)) != row
        self.B_inv[others] -= np.outer(u[others], self.B_inv[row])
        theta = self.x_B[row] / piv
        self.x_B[others] -= theta * u[others]
        self.x_B[row] = theta
        self.x_B[np.abs(self.x_B) < self.tol] = 0.0
        self.basis[row] = col
        self.iterations += 1
        if self.iterations % self.refactor_every == 0:
            self.refactor()

    def run(self, c, allowed, max_iter):
        """Minimize ``c`` over columns flagged in ``allowed``; returns status.

        Dantzig pricing with largest-pivot tie-breaking; after
        ``bland_after`` consecutive degenerate pivots switches to Bland's
        rule until the objective moves again.
        """
        degenerate = 0
        for _ in range(max_iter):
            y = c[self.basis] @ self.B_inv
            reduced = c - y @ self.A
            reduced[self.basis] = 0.0
            candidates = np.flatnonzero(allowed & (reduced < -self.tol))
            if candidates.size == 0:
                return "optimal"
            bland = degenerate >= self.bland_after
            if bland:
                col = candidates[0]
            else:
                col = candidates[np.argmin(reduced[candidates])]
            u = self.B_inv @ self.A[:, col]
            rows = np.flatnonzero(u > self.pivot_tol)
            if rows.size == 0:
                return "unbounded"
            ratios = self.x_B[rows] / u[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
            if bland:
                row = ties[np.argmin([self.basis[r] for r in ties])]
            else:
                row = ties[np.argmax(u[ties])]
            degenerate = degenerate + 1 if best <= self.tol else 0
            self.pivot(row, col, u)
        return "iteration_limit"


def solve_lp(problem: LpProblem, tol: float = 1e-9, max_iter: int = 200_000,
             refactor_every: int = 50) -> LpResult:
    n = problem.num_vars
    m_eq = problem.A_eq.shape[0]
    m_ub = problem.A_ub.shape[0]
    m = m_eq + m_ub

    # standard form: [A_eq 0; A_ub I] [x; s] = [b_eq; b_ub]
    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = problem.A_eq
    A[m_eq:, :n] = problem.A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([problem.b_eq, problem.b_ub])
    flip = b < 0
    A[flip] *= -1
    b = np.where(flip, -b, b)

    n_std = n + m_ub
    A_full = np.hstack([A, np.eye(m)])
    artificial = np.zeros(n_std + m, dtype=bool)
    artificial[n_std:] = True

    tab = _Tableau(A_full, b, range(n_std, n_std + m), tol, refactor_every)
    c1 = artificial.astype(float)
    status = tab.run(c1, ~artificial, max_iter)
    if status != "optimal":
        raise SolverError(f"phase 1 stopped: {status}")
    infeasibility = float(c1[tab.basis] @ tab.x_B)
    if infeasibility > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleError(f"no feasible point (phase-1 residual {infeasibility:.3g})")

    # drive zero-level artificials out of the basis; drop redundant rows
    keep_rows = np.ones(m, dtype=bool)
    for row in range(m):
        if not artificial[tab.basis[row]]:
            continue
        row_coeffs = tab.B_inv[row] @ A_full
        cols = np.flatnonzero(~artificial & (np.abs(row_coeffs) > 1e-7))
        cols = [j for j in cols if j not in tab.basis]
        if cols:
            col = cols[0]
            tab.pivot(row, col, tab.B_inv @ A_full[:, col])
        else:
            keep_rows[row] = False
    if not keep_rows.all():
        basis = [j for j, keep in zip(tab.basis, keep_rows) if keep]
        tab = _Tableau(A_full[keep_rows], b[keep_rows], basis, tol, refactor_every)
        tab.iterations = 0

    c2 = np.concatenate([problem.c, np.zeros(m_ub + m)])
    status = tab.run(c2, ~artificial, max_iter)
    if status == "unbounded":
        raise UnboundedError("objective unbounded below")
    if status != "optimal":
        raise SolverError(f"phase 2 stopped: {status}")

    z = np.zeros(n_std + m)
    z[tab.basis] = tab.x_B
    x = z[:n]
    return LpResult(x=x, objective=float(problem.c @ x), iterations=tab.iterations,
                    basis=list(tab.basis))
