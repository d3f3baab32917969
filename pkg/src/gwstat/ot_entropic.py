"""Entropic optimal transport via log-domain Sinkhorn iterations.

All updates run in the log domain with row/column max subtraction inside the
log-sum-exp, so kernels never overflow even for the quartically scaled costs
produced by the variational reformulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from gwstat.measures import Coupling, DiscreteMeasure

__all__ = ["EotSolution", "SinkhornError", "sinkhorn"]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000


class SinkhornError(RuntimeError):
    """Non-convergence within the iteration budget; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class EotSolution:
    """Entropic plan, dual potentials and regularized transport value."""

    plan: Coupling
    potentials: tuple[np.ndarray, np.ndarray]
    value: float
    eps: float
    iterations: int
    residual: float


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w)


def sinkhorn(
    C: np.ndarray,
    m0: DiscreteMeasure,
    m1: DiscreteMeasure,
    eps: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> EotSolution:
    """Solve entropic OT between two discrete measures.

    Convergence is certified on the implied plan: iteration stops when every
    row and column marginal matches its weight within ``tol`` in relative
    terms (which also bounds the absolute violation, since weights are at
    most one). ``init`` optionally warm-starts the potentials. Potentials are
    normalized so their ``m1``-average vanishes.

    Raises
    ------
    SinkhornError
        If the residual has not dropped below ``tol`` after ``max_iter``
        iterations.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    C = np.asarray(C, dtype=float)
    if C.shape != (m0.size, m1.size):
        raise ValueError("cost shape does not match marginal sizes")
    w0, w1 = m0.weights, m1.weights
    lw0, lw1 = _log_weights(w0), _log_weights(w1)
    if init is not None:
        f = np.array(init[0], dtype=float)
        g = np.array(init[1], dtype=float)
    else:
        f = np.zeros(m0.size)
        g = np.zeros(m1.size)

    pos0 = w0 > 0
    pos1 = w1 > 0
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        f = -eps * logsumexp((g - C) / eps + lw1, axis=1)
        g = -eps * logsumexp((f[:, None] - C) / eps + lw0[:, None], axis=0)
        log_plan = (f[:, None] + g[None, :] - C) / eps + lw0[:, None] + lw1[None, :]
        P = np.exp(log_plan)
        row = P.sum(axis=1)
        col = P.sum(axis=0)
        res_r = np.max(np.abs(row[pos0] / w0[pos0] - 1.0)) if pos0.any() else 0.0
        res_c = np.max(np.abs(col[pos1] / w1[pos1] - 1.0)) if pos1.any() else 0.0
        residual = max(res_r, res_c)
        if residual < tol:
            break
    else:
        raise SinkhornError(
            f"sinkhorn did not reach tol={tol} in {max_iter} iterations "
            f"(residual {residual:.3e})",
            residual=residual,
        )

    shift = float(np.dot(g, w1))
    f = f + shift
    g = g - shift
    P = np.exp((f[:, None] + g[None, :] - C) / eps + lw0[:, None] + lw1[None, :])
    plan = Coupling(P, m0, m1)
    direct_sum = f[:, None] + g[None, :]
    value = float(np.vdot(P, C)) + float(np.vdot(P, direct_sum - C))
    return EotSolution(
        plan=plan,
        potentials=(f, g),
        value=value,
        eps=float(eps),
        iterations=iterations,
        residual=float(residual),
    )
