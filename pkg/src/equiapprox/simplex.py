"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A_eq x = b_eq,  G x <= h,  x >= 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
MAX_SIZE = 10_000


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    objective: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        d = self.objective.size
        self.A_eq, self.b_eq = self._pair(self.A_eq, self.b_eq, d, "equality")
        self.G, self.h = self._pair(self.G, self.h, d, "inequality")

    @staticmethod
    def _pair(mat, rhs, d, what):
        if mat is None:
            return np.zeros((0, d)), np.zeros(0)
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        rhs = np.asarray(rhs, dtype=float).ravel()
        if mat.shape[1] != d or mat.shape[0] != rhs.size:
            raise ValueError(f"{what} constraints have inconsistent shapes {mat.shape}, {rhs.shape}")
        return mat, rhs

    @property
    def num_vars(self) -> int:
        return self.objective.size

    def is_feasible(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        return bool(
            np.all(x >= -tol)
            and np.all(np.abs(self.A_eq @ x - self.b_eq) <= tol)
            and np.all(self.G @ x - self.h <= tol)
        )


@dataclass
class SolveResult:
    status: Status
    solution: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_value: float = float("nan")
    iterations: int = 0


class _Tableau:
    """Rows ``T[r] = [coeffs | rhs]``; ``basis[r]`` is the basic column of row r."""

    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r: int, c: int):
        T = self.T
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = c
        self.iterations += 1

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> Status:
        """Maximise ``cost`` over the columns flagged in ``allowed``."""
        T = self.T
        m = T.shape[0]
        while True:
            cb = cost[self.basis]
            reduced = cost - cb @ T[:, :-1]
            reduced[~allowed] = 0.0
            reduced[self.basis] = 0.0
            entering = np.flatnonzero(reduced > PIVOT_TOL)
            if entering.size == 0:
                return Status.OPTIMAL
            c = int(entering[0])  # Bland: smallest improving index
            col = T[:, c]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return Status.UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda k: self.basis[k]))  # Bland: smallest leaving index
            self.pivot(r, c)
            if self.iterations > 50 * (m + T.shape[1]) + 1000:
                raise RuntimeError("simplex failed to terminate")


def simplex_solve(lp: LinearProgram) -> SolveResult:
    d = lp.num_vars
    n_eq, n_ub = lp.A_eq.shape[0], lp.G.shape[0]
    m = n_eq + n_ub
    if max(d + n_ub, m) > MAX_SIZE:
        raise ValueError(f"LP too large for dense simplex ({d} vars, {m} constraints)")
    for arr in (lp.objective, lp.A_eq, lp.b_eq, lp.G, lp.h):
        if not np.all(np.isfinite(arr)):
            raise ValueError("LP data must be finite")

    # columns: x (d) | slacks (n_ub) | artificials (m) | rhs
    A = np.zeros((m, d + n_ub))
    A[:n_eq, :d] = lp.A_eq
    A[n_eq:, :d] = lp.G
    A[n_eq:, d:] = np.eye(n_ub)
    b = np.concatenate([lp.b_eq, lp.h])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    n_real = d + n_ub
    T = np.zeros((m, n_real + m + 1))
    T[:, :n_real] = A
    T[:, n_real:n_real + m] = np.eye(m)
    T[:, -1] = b
    tab = _Tableau(T, list(range(n_real, n_real + m)))

    # phase 1: maximise -(sum of artificials)
    cost1 = np.zeros(n_real + m)
    cost1[n_real:] = -1.0
    tab.run(cost1, np.ones(n_real + m, dtype=bool))
    infeas = tab.T[:, -1][np.array(tab.basis) >= n_real].sum() if m else 0.0
    if infeas > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
        return SolveResult(Status.INFEASIBLE, iterations=tab.iterations)

    # drive remaining (zero-valued) artificials out; drop redundant rows
    keep = []
    for r in range(m):
        if tab.basis[r] < n_real:
            keep.append(r)
            continue
        cand = np.flatnonzero(np.abs(tab.T[r, :n_real]) > 1e-9)
        if cand.size:
            tab.pivot(r, int(cand[0]))
            keep.append(r)
    tab.T = tab.T[keep]
    tab.basis = [tab.basis[r] for r in keep]

    cost2 = np.zeros(n_real + m)
    cost2[:d] = lp.objective
    allowed = np.zeros(n_real + m, dtype=bool)
    allowed[:n_real] = True
    status = tab.run(cost2, allowed)
    if status is Status.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED, iterations=tab.iterations)

    x = np.zeros(n_real + m)
    x[tab.basis] = tab.T[:, -1]
    sol = np.clip(x[:d], 0.0, None)
    return SolveResult(Status.OPTIMAL, sol, float(lp.objective @ sol), tab.iterations)
