"""Direct sampling of the null limit law.

Each draw maximizes a mean-zero Gaussian cost over the polytope
``{u : u_i - u_j <= b_ij}`` (plus a box on the first coordinate) and scales
the optimum by ``sqrt(2)``. The Gaussian is orthogonal to the all-ones vector
by construction, which makes the box inactive: the program reduces exactly to
a min-cost transshipment with arc costs ``b``, i.e. a transportation problem
between the positive and negative cost entries under shortest-path distances.
That reduction is what gets solved here, via the same network simplex kernel
as exact OT, with the shortest-path matrix computed once per polytope and
shared across draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gwstat._kernels import TransportSolver
from gwstat.graphs import GraphDistribution
from gwstat.measures import DiscreteMeasure, center, moments
from gwstat.rng import as_generator, stream

__all__ = [
    "NullPolytope",
    "CostGaussianSpec",
    "DegeneratePolytopeError",
    "OrthogonalityError",
    "build_polytope",
    "plain_cost_spec",
    "graph_cost_spec",
    "sample_cost",
    "lp_value",
    "sample_null_limit",
    "quantile",
]


class DegeneratePolytopeError(ValueError):
    """The feasible set has empty interior (point-mass measure)."""


class OrthogonalityError(RuntimeError):
    """Cost vector is not orthogonal to the ones vector; the unboxed program
    would be unbounded, indicating a broken Gaussian construction."""


@dataclass(frozen=True)
class NullPolytope:
    """Difference-constraint system on the centered support values."""

    support: np.ndarray
    bounds: np.ndarray
    delta: float
    _paths: list = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return len(self.support)

    def shortest_paths(self) -> np.ndarray:
        """All-pairs shortest paths under the bound matrix (cached)."""
        if not self._paths:
            D = self.bounds.copy()
            np.fill_diagonal(D, 0.0)
            for k in range(self.size):
                np.minimum(D, D[:, k][:, None] + D[k, :][None, :], out=D)
            D.setflags(write=False)
            self._paths.append(D)
        return self._paths[0]


def build_polytope(mu_n: DiscreteMeasure, delta: float = 1.0) -> NullPolytope:
    """Bounds ``b_ij = 2(|x_i|^2-|x_j|^2)^2 + 8(x_i-x_j)^T S (x_i-x_j)``
    on the centered support, with ``S`` the centered cross-correlation."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    c = center(mu_n)
    if c.size < 2:
        raise DegeneratePolytopeError("degenerate null polytope: point-mass measure")
    X = c.points
    sq = np.einsum("id,id->i", X, X)
    S = moments(c).cross_corr
    G = X @ S @ X.T
    quad = np.diag(G)[:, None] + np.diag(G)[None, :] - 2.0 * G
    b = 2.0 * (sq[:, None] - sq[None, :]) ** 2 + 8.0 * quad
    np.fill_diagonal(b, 0.0)
    off = b[~np.eye(c.size, dtype=bool)]
    if np.any(off <= 0):
        raise DegeneratePolytopeError("nonpositive bound entry; support is degenerate")
    b.setflags(write=False)
    return NullPolytope(support=X, bounds=b, delta=float(delta))


@dataclass(frozen=True)
class CostGaussianSpec:
    """How to draw the Gaussian cost over the support.

    ``plain``: multinomial covariance of the measure's weight vector.
    ``graph-block``: one independent multinomial block per edge of a graph
    model, scaled by ``1/((N-1)N(N+1))``, each block entry feeding the two
    support points its evaluation references.
    """

    mode: str
    size: int
    weights: np.ndarray | None = None
    blocks: tuple = ()
    scale_denom: float = 1.0


def plain_cost_spec(mu_n: DiscreteMeasure) -> CostGaussianSpec:
    return CostGaussianSpec(mode="plain", size=mu_n.size, weights=mu_n.weights)


def graph_cost_spec(gd: GraphDistribution, embedded: DiscreteMeasure) -> CostGaussianSpec:
    """Per-edge blocks with the evaluation map into the embedded support.

    Each atom ``t`` of the edge law of ``{i, j}`` references the support
    points ``-e_i + t e_j`` and ``-e_j + t e_i``; atoms with ``t == 0``
    reference the merged anchor atoms.
    """
    N = gd.n_vertices
    if embedded.dim != N:
        raise ValueError("embedded measure dimension must equal the vertex count")
    index = {pt.tobytes(): k for k, pt in enumerate(embedded.points)}
    blocks = []
    for (i, j) in sorted(gd.edge_dists):
        law = gd.edge_dists[(i, j)]
        idx = np.empty((law.size, 2), dtype=np.int64)
        for k, t in enumerate(law.points[:, 0]):
            p_ij = np.zeros(N)
            p_ij[i] = -1.0
            p_ij[j] += t
            p_ji = np.zeros(N)
            p_ji[j] = -1.0
            p_ji[i] += t
            try:
                idx[k, 0] = index[p_ij.tobytes()]
                idx[k, 1] = index[p_ji.tobytes()]
            except KeyError:
                raise ValueError(
                    "edge atom does not appear in the embedded support; "
                    "pass the embedding of the same model"
                ) from None
        blocks.append((law.weights, idx))
    return CostGaussianSpec(
        mode="graph-block",
        size=embedded.size,
        blocks=tuple(blocks),
        scale_denom=float((N - 1) * N * (N + 1)),
    )


def _orthogonal_gaussian(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exact sample of N(0, diag(p) - p p^T) with sum exactly zero.

    Uses the factorization ``diag(sqrt(p)) (I - s s^T)`` with ``s = sqrt(p)``
    and re-projects once to push the float residue of the ones-inner-product
    to the 1e-28 scale (the projection is almost surely the identity in exact
    arithmetic).
    """
    s = np.sqrt(p)
    w = rng.standard_normal(len(p))
    z = s * (w - np.dot(s, w) * s)
    return z - z.sum() * p


def sample_cost(spec: CostGaussianSpec, seed) -> np.ndarray:
    """One Gaussian cost vector over the support; ``|sum| < 1e-12`` always."""
    rng = as_generator(seed, "cost")
    if spec.mode == "plain":
        return _orthogonal_gaussian(spec.weights, rng)
    if spec.mode == "graph-block":
        z = np.zeros(spec.size)
        for probs, idx in spec.blocks:
            zeta = _orthogonal_gaussian(probs, rng)
            np.add.at(z, idx[:, 0], zeta)
            np.add.at(z, idx[:, 1], zeta)
        z /= spec.scale_denom
        return z
    raise ValueError(f"unknown cost mode {spec.mode!r}")


def lp_value(poly: NullPolytope, c: np.ndarray) -> float:
    """Maximum of ``c . u`` over the polytope.

    Requires ``c`` orthogonal to ones (guaranteed for sampled costs); solves
    the dual transshipment exactly: route each positive entry to the negative
    entries at shortest-path prices. The optimum does not depend on the box
    width ``delta``.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (poly.size,):
        raise ValueError("cost length does not match the support size")
    scale = float(np.sum(np.abs(c)))
    if abs(float(np.sum(c))) > 1e-9 * (1.0 + scale):
        raise OrthogonalityError(
            f"cost sums to {float(np.sum(c))!r}; the program is unbounded without the box"
        )
    src = np.flatnonzero(c > 0)
    snk = np.flatnonzero(c < 0)
    if len(src) == 0 or len(snk) == 0:
        return 0.0
    supplies = c[src].copy()
    demands = -c[snk].copy()
    diff = float(supplies.sum() - demands.sum())
    if diff > 0:
        demands[int(np.argmax(demands))] += diff
    else:
        supplies[int(np.argmax(supplies))] -= diff
    D = poly.shortest_paths()
    sub = np.ascontiguousarray(D[np.ix_(src, snk)])
    solver = TransportSolver(supplies, demands)
    rows, cols, flows, _, _, _ = solver.solve(sub)
    return float(np.dot(flows, sub[rows, cols]))


def sample_null_limit(poly: NullPolytope, spec: CostGaussianSpec, k: int, seed) -> np.ndarray:
    """``k`` independent draws: ``sqrt(2)`` times the program optimum each.

    Draw ``t`` uses the derived stream ``(seed, "ln-draw", t)``, so results
    do not depend on evaluation order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if spec.size != poly.size:
        raise ValueError("cost spec and polytope have mismatched support sizes")
    out = np.empty(k)
    for t in range(k):
        z = sample_cost(spec, stream(seed, "ln-draw", t))
        out[t] = np.sqrt(2.0) * lp_value(poly, z)
    return out


def quantile(samples, level: float) -> float:
    """Empirical quantile with the higher-interpolation convention."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    if not 0.0 < level <= 1.0:
        raise ValueError("level must be in (0, 1]")
    return float(np.quantile(samples, level, method="higher"))
