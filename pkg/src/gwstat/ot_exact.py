"""Exact discrete optimal transport and linear assignment.

``solve_ot`` runs a network simplex on the bipartite transportation graph and
returns both the optimal plan (a vertex of the transportation polytope) and
the basic dual variables as potentials. The solver class is reusable: the
basis persists across solves with the same marginals, which is what makes the
subgradient outer loop cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from gwstat._kernels import TransportSolver
from gwstat.measures import Coupling, DiscreteMeasure

__all__ = ["OtSolution", "variational_cost_matrix", "solve_ot", "linear_assignment", "ReusableOtSolver"]


@dataclass(frozen=True)
class OtSolution:
    """Optimal plan plus dual potentials; ``value`` is the primal optimum."""

    plan: Coupling
    potentials: tuple[np.ndarray, np.ndarray]
    value: float


def variational_cost_matrix(m0: DiscreteMeasure, m1: DiscreteMeasure, A: np.ndarray) -> np.ndarray:
    """Cost ``-4 |x|^2 |y|^2 - 32 x^T A y`` on the product of supports."""
    A = np.asarray(A, dtype=float)
    if A.shape != (m0.dim, m1.dim):
        raise ValueError(f"matrix shape {A.shape} does not match dims ({m0.dim}, {m1.dim})")
    sq0 = np.einsum("id,id->i", m0.points, m0.points)
    sq1 = np.einsum("jd,jd->j", m1.points, m1.points)
    return -4.0 * np.outer(sq0, sq1) - 32.0 * (m0.points @ A @ m1.points.T)


class ReusableOtSolver:
    """Thin wrapper over the transport kernel keyed to a fixed marginal pair."""

    def __init__(self, m0: DiscreteMeasure, m1: DiscreteMeasure):
        self.m0 = m0
        self.m1 = m1
        self._solver = TransportSolver(m0.weights, m1.weights)

    def reset(self) -> None:
        self._solver.reset()

    def solve_raw(self, C: np.ndarray):
        """Returns ``(rows, cols, flows, phi0, phi1)`` for the basic optimum."""
        rows, cols, flows, u, v, _ = self._solver.solve(C)
        return rows, cols, flows, u, v

    def dense_plan(self, rows, cols, flows) -> np.ndarray:
        P = np.zeros((self.m0.size, self.m1.size))
        P[rows, cols] = flows
        return P


def solve_ot(C: np.ndarray, m0: DiscreteMeasure, m1: DiscreteMeasure) -> OtSolution:
    """Exact OT for cost matrix ``C`` between two discrete measures.

    The returned potentials are normalized so that ``max(phi1) == 0``; the
    value is recomputed as ``<C, plan>`` on the dense plan. Deterministic for
    identical inputs.
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (m0.size, m1.size):
        raise ValueError("cost shape does not match marginal sizes")
    solver = ReusableOtSolver(m0, m1)
    rows, cols, flows, u, v = solver.solve_raw(C)
    plan = Coupling(solver.dense_plan(rows, cols, flows), m0, m1)
    shift = float(np.max(v))
    phi0 = u + shift
    phi1 = v - shift
    value = float(np.vdot(C, plan.matrix))
    return OtSolution(plan=plan, potentials=(phi0, phi1), value=value)


def _assignment_value(S: np.ndarray) -> float:
    if S.size == 0:
        return 0.0
    r, c = linear_sum_assignment(S, maximize=True)
    return float(S[r, c].sum())


def linear_assignment(S: np.ndarray) -> np.ndarray:
    """Permutation maximizing ``sum_i S[i, sigma(i)]``.

    Among maximizers, returns the lexicographically smallest permutation
    (fixing rows in order, preferring the smallest admissible column).
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    if not np.all(np.isfinite(S)):
        raise ValueError("S must be finite")
    N = S.shape[0]
    tol = 1e-9 * (1.0 + float(np.max(np.abs(S)))) * max(N, 1)
    best = _assignment_value(S)
    remaining = list(range(N))
    perm = np.empty(N, dtype=np.int64)
    prefix = 0.0
    for i in range(N):
        for j in remaining:
            rest = [c for c in remaining if c != j]
            sub = S[np.ix_(range(i + 1, N), rest)]
            if prefix + S[i, j] + _assignment_value(sub) >= best - tol:
                perm[i] = j
                prefix += S[i, j]
                remaining.remove(j)
                break
        else:
            raise RuntimeError("assignment backtracking failed")
    return perm
