"""Variational solvers for the squared (entropic) Gromov-Wasserstein distance.

The squared distance decomposes as a moment constant plus the infimum over
auxiliary matrices ``A`` of ``32 ||A||_F^2 + OT(c_A)``. The objective is
minimized with a projected accelerated subgradient method whose inner oracle
is exact OT (network simplex) for ``eps == 0`` and log-domain Sinkhorn for
``eps > 0``. Minimizers live in the Frobenius ball of radius
``0.5 * sqrt(M2 M2)`` of the centered marginals, which is the projection
radius used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from gwstat.measures import Coupling, DiscreteMeasure, center, moments, s1_term
from gwstat.ot_entropic import sinkhorn
from gwstat.ot_exact import ReusableOtSolver, variational_cost_matrix
from gwstat.rng import stream

__all__ = [
    "GwProblem",
    "SolveReport",
    "phi",
    "subgradient",
    "subgradient_method",
    "gw_distance_squared",
    "entropic_uniqueness_margin",
    "default_radius",
]

DEFAULT_STEP_CONSTANT = 128.0
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 50_000


def default_radius(mu0_centered: DiscreteMeasure, mu1_centered: DiscreteMeasure) -> float:
    """Tightest Frobenius radius guaranteed to contain all minimizers."""
    return 0.5 * np.sqrt(moments(mu0_centered).m2 * moments(mu1_centered).m2)


@dataclass(frozen=True)
class GwProblem:
    """Problem data for the variational solve; measures are stored centered."""

    mu0: DiscreteMeasure
    mu1: DiscreteMeasure
    radius: float
    eps: float = 0.0
    step_constant: float = DEFAULT_STEP_CONSTANT
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    sinkhorn_tol: float = 1e-9
    sinkhorn_max_iter: int = 100_000

    def __init__(
        self,
        mu0: DiscreteMeasure,
        mu1: DiscreteMeasure,
        radius: float | None = None,
        eps: float = 0.0,
        step_constant: float = DEFAULT_STEP_CONSTANT,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        sinkhorn_tol: float = 1e-9,
        sinkhorn_max_iter: int = 100_000,
    ):
        c0, c1 = center(mu0), center(mu1)
        if radius is None:
            radius = default_radius(c0, c1)
        if radius <= 0 and (c0.size > 1 or c1.size > 1):
            radius = max(radius, 1e-30)
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        if step_constant <= 0 or tol <= 0:
            raise ValueError("step constant and tol must be positive")
        object.__setattr__(self, "mu0", c0)
        object.__setattr__(self, "mu1", c1)
        object.__setattr__(self, "radius", float(radius))
        object.__setattr__(self, "eps", float(eps))
        object.__setattr__(self, "step_constant", float(step_constant))
        object.__setattr__(self, "tol", float(tol))
        object.__setattr__(self, "max_iter", int(max_iter))
        object.__setattr__(self, "sinkhorn_tol", float(sinkhorn_tol))
        object.__setattr__(self, "sinkhorn_max_iter", int(sinkhorn_max_iter))

    def project(self, A: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(A))
        if norm <= self.radius or norm == 0.0:
            return A
        return A * (self.radius / norm)


@dataclass(frozen=True)
class SolveReport:
    """Solver output bundle.

    ``value`` is the squared-distance estimate ``s1 + phi_value``;
    ``subgrad_norm`` is the Frobenius norm of the subgradient element at
    ``A_opt`` (recomputable from the plan).
    """

    A_opt: np.ndarray
    value: float
    phi_value: float
    plan: Coupling
    subgrad_norm: float
    iterations: int
    converged: bool
    s1: float = field(default=0.0)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "A_opt": self.A_opt.tolist(),
            "value": self.value,
            "phi_value": self.phi_value,
            "s1": self.s1,
            "plan": self.plan.matrix.tolist(),
            "subgrad_norm": self.subgrad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
        }


class _Oracle:
    """Per-problem evaluation state: warm-started inner OT solves."""

    def __init__(self, prob: GwProblem):
        self.prob = prob
        self.m0, self.m1 = prob.mu0, prob.mu1
        self._exact = ReusableOtSolver(self.m0, self.m1) if prob.eps == 0 else None
        self._warm_potentials = None

    def evaluate(self, A: np.ndarray):
        """Returns ``(phi_value, cross_corr, dense_plan)`` at ``A``."""
        C = variational_cost_matrix(self.m0, self.m1, A)
        if self.prob.eps == 0:
            rows, cols, flows, _, _ = self._exact.solve_raw(C)
            ot_value = float(np.dot(flows, C[rows, cols]))
            weighted = self.m0.points[rows] * flows[:, None]
            cross = weighted.T @ self.m1.points[cols]
            plan = None
            self._last_basis = (rows, cols, flows)
        else:
            sol = sinkhorn(
                C,
                self.m0,
                self.m1,
                self.prob.eps,
                tol=self.prob.sinkhorn_tol,
                max_iter=self.prob.sinkhorn_max_iter,
                init=self._warm_potentials,
            )
            self._warm_potentials = sol.potentials
            ot_value = sol.value
            plan = sol.plan.matrix
            cross = self.m0.points.T @ plan @ self.m1.points
            self._last_basis = None
        phi_value = 32.0 * float(np.vdot(A, A)) + ot_value
        return phi_value, cross, plan

    def dense_plan(self, plan):
        if plan is not None:
            return plan
        rows, cols, flows = self._last_basis
        return self._exact.dense_plan(rows, cols, flows)


def phi(prob: GwProblem, A: np.ndarray) -> tuple[float, Coupling]:
    """Objective ``32 ||A||_F^2 + OT_{c_A}`` and an attaining plan."""
    oracle = _Oracle(prob)
    value, _, plan = oracle.evaluate(np.asarray(A, dtype=float))
    coupling = Coupling(oracle.dense_plan(plan), prob.mu0, prob.mu1)
    return value, coupling


def subgradient(prob: GwProblem, A: np.ndarray, sign_flipped: bool = False) -> np.ndarray:
    """Subgradient element ``64 A - 32 * cross_corr(plan at A)``.

    For ``eps > 0`` the plan is unique and this is the exact gradient.
    ``sign_flipped`` applies ``+32`` instead (debug hook for comparing the
    two step conventions); the minus sign is the one consistent with
    stationarity ``2 A* = cross_corr``.
    """
    A = np.asarray(A, dtype=float)
    oracle = _Oracle(prob)
    _, cross, _ = oracle.evaluate(A)
    if sign_flipped:
        return 64.0 * A + 32.0 * cross
    return 64.0 * A - 32.0 * cross


def subgradient_method(
    prob: GwProblem,
    A0: np.ndarray,
    sign_flipped: bool = False,
) -> SolveReport:
    """Projected accelerated subgradient descent on the variational objective.

    Steps are ``beta = 1/(2L)``, ``gamma_k = k/(4L)`` and mixing
    ``tau_k = 2/(k+2)``;  iterates are projected onto the Frobenius ball by
    rescaling. Stops once the subgradient norm at the current iterate drops
    below ``tol``, or after ``max_iter`` iterations (then ``converged`` is
    False; not an error).
    """
    L = prob.step_constant
    beta = 1.0 / (2.0 * L)
    oracle = _Oracle(prob)
    s1 = s1_term(prob.mu0, prob.mu1)

    A = prob.project(np.array(A0, dtype=float))
    C_avg = A.copy()
    phi_value, cross, plan = oracle.evaluate(A)
    G = 64.0 * A + 32.0 * cross if sign_flipped else 64.0 * A - 32.0 * cross
    gnorm = float(np.linalg.norm(G))
    iterations = 1
    while gnorm >= prob.tol and iterations <= prob.max_iter:
        k = iterations
        B = prob.project(A - beta * G)
        C_avg = prob.project(C_avg - (k / (4.0 * L)) * G)
        tau = 2.0 / (k + 2.0)
        A = tau * C_avg + (1.0 - tau) * B
        phi_value, cross, plan = oracle.evaluate(A)
        G = 64.0 * A + 32.0 * cross if sign_flipped else 64.0 * A - 32.0 * cross
        gnorm = float(np.linalg.norm(G))
        iterations += 1

    coupling = Coupling(oracle.dense_plan(plan), prob.mu0, prob.mu1)
    return SolveReport(
        A_opt=A,
        value=s1 + phi_value,
        phi_value=phi_value,
        plan=coupling,
        subgrad_norm=gnorm,
        iterations=iterations,
        converged=bool(gnorm < prob.tol),
        s1=s1,
    )


def default_starts(prob: GwProblem, seed: int = 0, n_random: int = 4) -> list[np.ndarray]:
    """Zero start, the identity-map cross-correlation start when shapes allow,
    and seeded random points in the projection ball."""
    d0, d1 = prob.mu0.dim, prob.mu1.dim
    starts = [np.zeros((d0, d1))]
    if d0 == d1:
        cross = 0.5 * np.einsum("i,id,ie->de", prob.mu0.weights, prob.mu0.points, prob.mu0.points)
        starts.append(prob.project(cross))
    rng = stream(seed, "gw-default-starts")
    for _ in range(n_random):
        direction = rng.standard_normal((d0, d1))
        norm = np.linalg.norm(direction)
        if norm == 0:
            continue
        radius = prob.radius * rng.uniform() ** (1.0 / (d0 * d1))
        starts.append(direction * (radius / norm))
    return starts


def gw_distance_squared(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    eps: float = 0.0,
    starts: list[np.ndarray] | None = None,
    seed: int = 0,
    **problem_kwargs,
) -> SolveReport:
    """Squared distance estimate: best subgradient run over a set of starts.

    Measures are centered internally; ``starts`` defaults to the zero and
    cross-correlation starts plus four seeded random points in the ball.
    """
    prob = GwProblem(mu0, mu1, eps=eps, **problem_kwargs)
    if starts is None:
        starts = default_starts(prob, seed=seed)
    if len(starts) == 0:
        raise ValueError("starts must be nonempty")
    best: SolveReport | None = None
    for A0 in starts:
        report = subgradient_method(prob, np.asarray(A0, dtype=float))
        if best is None or report.value < best.value:
            best = report
    return best


def entropic_uniqueness_margin(mu0: DiscreteMeasure, mu1: DiscreteMeasure, eps: float) -> float:
    """``eps - 16 sqrt(M4 M4)`` of the centered measures; positive means the
    entropic objective is strictly convex and its minimizer unique."""
    c0, c1 = center(mu0), center(mu1)
    return float(eps - 16.0 * np.sqrt(moments(c0).m4 * moments(c1).m4))
