"""Discrete measures, couplings, moment summaries, and closed-form distance pieces.

A :class:`DiscreteMeasure` is a finitely supported probability measure on
``R^d``. Support points are canonicalized (duplicates merged with weights
added, then sorted lexicographically) so that "support" is well defined and
two measures over identical atoms compare equal structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "Coupling",
    "MomentSummary",
    "center",
    "moments",
    "s1_term",
    "gw_quadratic_value",
]

WEIGHT_SUM_TOL = 1e-12
MARGINAL_TOL = 1e-9
ENTRY_FLOOR = -1e-15


def _canonicalize(points: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge bitwise-equal points (adding weights) and sort lexicographically."""
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    wts = weights[order]
    keep = np.empty(len(pts), dtype=bool)
    keep[0] = True
    np.any(pts[1:] != pts[:-1], axis=1, out=keep[1:])
    groups = np.cumsum(keep) - 1
    merged_w = np.zeros(groups[-1] + 1)
    np.add.at(merged_w, groups, wts)
    return pts[keep], merged_w


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure: distinct points plus weights.

    Weights must be nonnegative and sum to one within ``1e-12``. Duplicate
    points are merged at construction. Zero-weight atoms are kept unless
    ``prune=True`` (pruning changes the support size and hence the dimension
    of any polytope built on it, so it is opt-in).
    """

    points: np.ndarray
    weights: np.ndarray
    _prune: bool = field(default=False, repr=False)

    def __init__(self, points, weights, prune: bool = False):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        wts = np.asarray(weights, dtype=np.float64)
        if pts.ndim != 2 or wts.ndim != 1 or len(pts) != len(wts):
            raise ValueError("points must be (N, d) and weights (N,) with matching N")
        if len(pts) < 1:
            raise ValueError("measure needs at least one support point")
        if np.any(wts < 0):
            raise ValueError("weights must be nonnegative")
        total = float(np.sum(wts))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")
        if prune:
            keep = wts > 1e-14
            pts, wts = pts[keep], wts[keep]
        pts, wts = _canonicalize(pts, wts)
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "_prune", prune)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def same_support_and_weights(self, other: "DiscreteMeasure") -> bool:
        """Bitwise equality of the canonicalized representation."""
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        return cls(np.asarray(data["points"], dtype=float), np.asarray(data["weights"], dtype=float))


@dataclass(frozen=True)
class Coupling:
    """Joint probability matrix with prescribed marginals.

    Entries below ``-1e-15`` are rejected; tiny negatives are clamped to 0.
    Row and column sums must match the marginal weights within ``1e-9`` in
    sup norm.
    """

    matrix: np.ndarray
    row_marginal: DiscreteMeasure
    col_marginal: DiscreteMeasure

    def __init__(self, matrix, row_marginal: DiscreteMeasure, col_marginal: DiscreteMeasure):
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.shape != (row_marginal.size, col_marginal.size):
            raise ValueError("coupling shape does not match marginals")
        if np.any(mat < ENTRY_FLOOR):
            raise ValueError("coupling has a significantly negative entry")
        mat = np.maximum(mat, 0.0)
        row_res = np.max(np.abs(mat.sum(axis=1) - row_marginal.weights))
        col_res = np.max(np.abs(mat.sum(axis=0) - col_marginal.weights))
        if row_res > MARGINAL_TOL or col_res > MARGINAL_TOL:
            raise ValueError(
                f"marginal residuals ({row_res:.3e}, {col_res:.3e}) exceed {MARGINAL_TOL}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "row_marginal", row_marginal)
        object.__setattr__(self, "col_marginal", col_marginal)


@dataclass(frozen=True)
class MomentSummary:
    """Mean, second/fourth absolute moments, and the cross-correlation matrix."""

    mean: np.ndarray
    m2: float
    m4: float
    cross_corr: np.ndarray


def center(m: DiscreteMeasure) -> DiscreteMeasure:
    """Translate the support so the measure has mean zero."""
    return DiscreteMeasure(m.points - m.mean(), m.weights)


def moments(m: DiscreteMeasure) -> MomentSummary:
    """Weighted mean, M2, M4 and cross-correlation, as exact weighted sums."""
    sq_norms = np.einsum("id,id->i", m.points, m.points)
    m2 = float(np.sum(m.weights * sq_norms))
    m4 = float(np.sum(m.weights * sq_norms**2))
    cross = np.einsum("i,id,ie->de", m.weights, m.points, m.points)
    return MomentSummary(mean=m.mean(), m2=m2, m4=m4, cross_corr=cross)


def _pair_quartic_sum(m: DiscreteMeasure) -> float:
    # sum_{i,j} w_i w_j ||x_i - x_j||^4 via broadcasting; numpy's pairwise
    # summation keeps the cancellation-prone fourth powers accurate
    diff = m.points[:, None, :] - m.points[None, :, :]
    sq = np.einsum("ijd,ijd->ij", diff, diff)
    return float(np.sum((m.weights[:, None] * m.weights[None, :]) * sq**2))


def s1_term(m0: DiscreteMeasure, m1: DiscreteMeasure) -> float:
    """Coupling-independent part of the squared distance.

    Equals the two within-space quartic pair sums minus four times the
    product of second moments. Callers pass centered measures; this routine
    does not re-center.
    """
    return _pair_quartic_sum(m0) + _pair_quartic_sum(m1) - 4.0 * moments(m0).m2 * moments(m1).m2


def gw_quadratic_value(p: Coupling) -> float:
    """Quadratic alignment objective of a coupling, by direct 4-index summation.

    Reference implementation, O(N0^2 N1^2); the discrepancy kernel is
    ``|  ||x-x'||^2 - ||y-y'||^2 |``.
    """
    x = p.row_marginal.points
    y = p.col_marginal.points
    dx = x[:, None, :] - x[None, :, :]
    d0 = np.einsum("ikd,ikd->ik", dx, dx)
    dy = y[:, None, :] - y[None, :, :]
    d1 = np.einsum("jld,jld->jl", dy, dy)
    delta = np.abs(d0[:, None, :, None] - d1[None, :, None, :])
    return float(np.einsum("ij,ijkl,kl->", p.matrix, delta, p.matrix))
