"""Warm-start machinery for distance estimation between embedded graph models.

Estimating the squared distance between two embedded models is a nonconvex
problem whose minimizers, under the null, all have the form
``A_T = 0.5 * int x (Tx)^T dmu0`` for a coordinate permutation ``T``. The
exhaustive search runs the subgradient solver from every such matrix; the
relaxed path (binary models only) minimizes the graph-matching objective over
the Birkhoff polytope by Frank-Wolfe, projects onto permutations via linear
assignment, and warm-starts a single subgradient run, with an a-priori
spectral certificate for when the relaxation is provably exact.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from gwstat.graphs import GraphDistribution, edge_prob_matrix
from gwstat.gw_solver import GwProblem, SolveReport, subgradient_method
from gwstat.measures import DiscreteMeasure
from gwstat.ot_exact import linear_assignment

__all__ = [
    "MatchCertificate",
    "MatchResult",
    "warm_start_matrix",
    "exhaustive_search",
    "birkhoff_relaxation",
    "relaxed_graph_matching",
    "ExhaustiveSearchCapError",
]

EXHAUSTIVE_CAP = 8


class ExhaustiveSearchCapError(ValueError):
    """Raised when N! solver runs would be required above the configured cap."""


@dataclass(frozen=True)
class MatchCertificate:
    """Spectral conditions under which the relaxation solves graph matching."""

    delta: float
    epsilon: float
    threshold: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class MatchResult:
    permutation: np.ndarray
    relaxed_matrix: np.ndarray
    relaxed_residual: float
    projected_residual: float
    certificate: MatchCertificate

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "permutation": self.permutation.tolist(),
            "relaxed_matrix": self.relaxed_matrix.tolist(),
            "relaxed_residual": self.relaxed_residual,
            "projected_residual": self.projected_residual,
            "certificate": self.certificate.to_dict(),
        }


def warm_start_matrix(mu0_centered: DiscreteMeasure, sigma) -> np.ndarray:
    """``0.5 * sum_i w_i x_i (x_i[sigma])^T`` for a coordinate permutation."""
    sigma = np.asarray(sigma, dtype=np.int64)
    if len(sigma) != mu0_centered.dim:
        raise ValueError("permutation length must equal the ambient dimension")
    if np.max(np.abs(mu0_centered.mean())) > 1e-9:
        raise ValueError("measure must be centered")
    X = mu0_centered.points
    w = mu0_centered.weights
    return 0.5 * ((w[:, None] * X).T @ X[:, sigma])


def _perm_values_worker(args):
    (points0, weights0, points1, weights1, perms, problem_kwargs) = args
    mu0 = DiscreteMeasure(points0, weights0)
    mu1 = DiscreteMeasure(points1, weights1)
    prob = GwProblem(mu0, mu1, **problem_kwargs)
    values = []
    for sigma in perms:
        A0 = warm_start_matrix(prob.mu0, np.asarray(sigma))
        values.append(subgradient_method(prob, A0).value)
    return values


def exhaustive_search(
    mu0n: DiscreteMeasure,
    mu1n: DiscreteMeasure,
    cap: int = EXHAUSTIVE_CAP,
    threads: int | None = None,
    **problem_kwargs,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Subgradient solve from every coordinate-permutation warm start.

    Returns ``(best_value, best_sigma, per_sigma_values)`` where the value
    array follows lexicographic permutation order (useful for warm-start gap
    diagnostics). Ties break toward the lexicographically smallest
    permutation. ``threads > 1`` distributes the N! independent runs over a
    process pool; the reduction is order-deterministic either way.
    """
    if mu0n.dim != mu1n.dim:
        raise ValueError("embedded measures must share their ambient dimension")
    N = mu0n.dim
    if N > cap:
        raise ExhaustiveSearchCapError(
            f"N={N} needs {N}! solver runs, above cap {cap}; use relaxed matching"
        )
    perms = list(itertools.permutations(range(N)))
    threads = _resolve_threads(threads)
    if threads <= 1 or len(perms) < 4 * threads:
        values = _perm_values_worker(
            (mu0n.points, mu0n.weights, mu1n.points, mu1n.weights, perms, problem_kwargs)
        )
    else:
        chunks = [perms[i::threads] for i in range(threads)]
        args = [
            (mu0n.points, mu0n.weights, mu1n.points, mu1n.weights, chunk, problem_kwargs)
            for chunk in chunks
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_perm_values_worker, args))
        values = [0.0] * len(perms)
        for t, chunk_vals in enumerate(results):
            for pos, val in enumerate(chunk_vals):
                values[pos * threads + t] = val
    values = np.asarray(values)
    best_idx = int(np.argmin(values))
    best_sigma = np.asarray(perms[best_idx], dtype=np.int64)
    return float(values[best_idx]), best_sigma, values


def _resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("GW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def birkhoff_relaxation(
    P0: np.ndarray,
    P1: np.ndarray,
    gap_tol: float = 1e-8,
    max_iter: int = 5000,
) -> np.ndarray:
    """Minimize ``||R P0 - P1 R||_F^2`` over doubly stochastic matrices.

    Frank-Wolfe from the uniform matrix; the linear minimization oracle is a
    linear assignment, so iterates stay exactly doubly stochastic. Stops when
    the duality gap falls below ``gap_tol``; returns the best iterate seen.
    """
    P0 = np.asarray(P0, dtype=float)
    P1 = np.asarray(P1, dtype=float)
    if P0.shape != P1.shape or P0.ndim != 2 or P0.shape[0] != P0.shape[1]:
        raise ValueError("P0 and P1 must be square matrices of equal size")
    N = P0.shape[0]
    R = np.full((N, N), 1.0 / N)

    def objective(M):
        diff = M @ P0 - P1 @ M
        return float(np.vdot(diff, diff))

    best_R = R.copy()
    best_f = objective(R)
    for k in range(max_iter):
        diff = R @ P0 - P1 @ R
        grad = 2.0 * (diff @ P0.T - P1.T @ diff)
        rows, cols = linear_sum_assignment(grad)
        E = np.zeros((N, N))
        E[rows, cols] = 1.0
        gap = float(np.vdot(grad, R - E))
        if gap < gap_tol:
            break
        R = R + (2.0 / (k + 2.0)) * (E - R)
        f = objective(R)
        if f < best_f:
            best_f = f
            best_R = R.copy()
    if objective(R) > best_f:
        return best_R
    return R


def _sign_fixed_eigendecomposition(P: np.ndarray):
    lams, vecs = np.linalg.eigh(P)
    dots = vecs.T @ np.ones(P.shape[0])
    flip = dots < 0
    vecs[:, flip] *= -1.0
    dots = np.abs(dots)
    return lams, vecs, dots


def spectral_certificate(P0: np.ndarray, projected_residual: float) -> MatchCertificate:
    """Evaluate the relaxation-exactness conditions on the first model matrix.

    ``delta`` is the smallest eigenvalue gap, ``epsilon`` the largest value
    compatible with ``eps <= v_i^T 1 <= 1/eps`` after fixing eigenvector signs
    so the inner products are nonnegative.
    """
    N = P0.shape[0]
    lams, _, dots = _sign_fixed_eigendecomposition(P0)
    delta = float(np.min(np.diff(np.sort(lams)))) if N > 1 else 0.0
    dmin, dmax = float(np.min(dots)), float(np.max(dots))
    epsilon = 0.0 if dmin <= 0.0 or dmax <= 0.0 else min(dmin, 1.0 / dmax)
    threshold = delta**2 * epsilon**4 / (12.0 * N**1.5)
    return MatchCertificate(
        delta=delta,
        epsilon=epsilon,
        threshold=threshold,
        holds=bool(projected_residual < threshold),
    )


def relaxed_graph_matching(
    mu0n: DiscreteMeasure,
    mu1n: DiscreteMeasure,
    gd0n: GraphDistribution,
    gd1n: GraphDistribution,
    **problem_kwargs,
) -> tuple[SolveReport, MatchResult]:
    """Relaxation, projection, certified warm start, one subgradient run.

    Both edge-probability matrices are scaled by the spectral radius of the
    first so that ``max |lambda| = 1`` holds where the certificate expects
    it. Binary models only.
    """
    P0 = edge_prob_matrix(gd0n)
    P1 = edge_prob_matrix(gd1n)
    scale = float(np.max(np.abs(np.linalg.eigvalsh(P0))))
    if scale > 0:
        P0 = P0 / scale
        P1 = P1 / scale
    R = birkhoff_relaxation(P0, P1)
    sigma = linear_assignment(R)
    E = np.zeros_like(R)
    E[np.arange(len(sigma)), sigma] = 1.0
    relaxed_residual = float(np.linalg.norm(R @ P0 - P1 @ R))
    projected_residual = float(np.linalg.norm(E @ P0 - P1 @ E))
    certificate = spectral_certificate(P0, projected_residual)

    prob = GwProblem(mu0n, mu1n, **problem_kwargs)
    A0 = warm_start_matrix(prob.mu0, sigma)
    report = subgradient_method(prob, A0)
    result = MatchResult(
        permutation=sigma,
        relaxed_matrix=R,
        relaxed_residual=relaxed_residual,
        projected_residual=projected_residual,
        certificate=certificate,
    )
    return report, result
