"""Independent-edge random graph models and their embedding into R^N.

A model on ``N`` vertices fixes one finitely supported edge-weight law per
unordered vertex pair. Models embed into discrete measures on ``R^N`` by
placing, for every ordered pair ``(i, j)`` and edge atom ``t``, mass
proportional to the atom probability at ``-e_i + t e_j``, plus an anchor
atom at each ``-e_i``; the anchors pin the only admissible isometries to
coordinate permutations, so two models are isomorphic exactly when their
embeddings are at distance zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gwstat.measures import DiscreteMeasure
from gwstat.rng import as_generator

__all__ = [
    "WeightedGraph",
    "GraphDistribution",
    "NonBinaryModelError",
    "sample_graphs",
    "empirical_distribution",
    "embed",
    "permute",
    "edge_prob_matrix",
]


class NonBinaryModelError(ValueError):
    """An operation requiring {0,1} edge weights met a non-binary edge law."""


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric nonnegative weight matrix with zero diagonal."""

    weights: np.ndarray

    def __init__(self, weights):
        W = np.asarray(weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.array_equal(W, W.T):
            raise ValueError("weight matrix must be symmetric")
        if np.any(np.diagonal(W) != 0):
            raise ValueError("weight matrix must have zero diagonal")
        if np.any(W < 0):
            raise ValueError("weights must be nonnegative")
        W = W.copy()
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def n_vertices(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        n = self.n_vertices
        iu = np.triu_indices(n, k=1)
        return {"schema": 1, "n": n, "weights": self.weights[iu].tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightedGraph":
        n = int(data["n"])
        W = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        flat = np.asarray(data["weights"], dtype=float)
        if flat.shape != iu[0].shape:
            raise ValueError("flat weight list has wrong length")
        W[iu] = flat
        return cls(W + W.T)


@dataclass(frozen=True)
class GraphDistribution:
    """Edge-independent random graph model: one 1-D edge law per pair i<j."""

    n_vertices: int
    edge_dists: dict

    def __init__(self, n_vertices: int, edge_dists: dict):
        N = int(n_vertices)
        if N < 2:
            raise ValueError("need at least two vertices")
        dists = {}
        for (i, j), law in edge_dists.items():
            if not (0 <= i < j < N):
                raise ValueError(f"edge key ({i}, {j}) must satisfy 0 <= i < j < N")
            if law.dim != 1:
                raise ValueError("edge laws must be 1-D")
            if np.any(law.points < 0):
                raise ValueError("edge weights must be nonnegative")
            dists[(int(i), int(j))] = law
        if len(dists) != N * (N - 1) // 2:
            raise ValueError(f"expected {N * (N - 1) // 2} edge laws, got {len(dists)}")
        object.__setattr__(self, "n_vertices", N)
        object.__setattr__(self, "edge_dists", dists)

    def law(self, i: int, j: int) -> DiscreteMeasure:
        """Edge law of the unordered pair {i, j}."""
        return self.edge_dists[(i, j) if i < j else (j, i)]

    def to_dict(self) -> dict:
        edges = []
        for (i, j) in sorted(self.edge_dists):
            law = self.edge_dists[(i, j)]
            edges.append(
                {
                    "i": i,
                    "j": j,
                    "support": law.points[:, 0].tolist(),
                    "probs": law.weights.tolist(),
                }
            )
        return {"schema": 1, "n": self.n_vertices, "edges": edges}

    @classmethod
    def from_dict(cls, data: dict) -> "GraphDistribution":
        dists = {}
        for e in data["edges"]:
            law = DiscreteMeasure(np.asarray(e["support"], dtype=float), np.asarray(e["probs"], dtype=float))
            dists[(int(e["i"]), int(e["j"]))] = law
        return cls(int(data["n"]), dists)

    @classmethod
    def bernoulli(cls, probs: np.ndarray) -> "GraphDistribution":
        """Binary model from a symmetric matrix of edge probabilities."""
        P = np.asarray(probs, dtype=float)
        N = P.shape[0]
        dists = {}
        for i in range(N):
            for j in range(i + 1, N):
                p = float(P[i, j])
                dists[(i, j)] = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([1.0 - p, p]))
        return cls(N, dists)


def sample_graphs(gd: GraphDistribution, n: int, seed) -> list[WeightedGraph]:
    """Draw ``n`` independent graphs; every edge weight comes from its own law."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = as_generator(seed, "sample-graphs")
    N = gd.n_vertices
    mats = np.zeros((n, N, N))
    for (i, j) in sorted(gd.edge_dists):
        law = gd.edge_dists[(i, j)]
        draws = rng.choice(law.points[:, 0], size=n, p=law.weights)
        mats[:, i, j] = draws
        mats[:, j, i] = draws
    return [WeightedGraph(mats[k]) for k in range(n)]


def empirical_distribution(graphs: list[WeightedGraph]) -> GraphDistribution:
    """Empirical edge laws (duplicate observed weights merged) from samples."""
    if len(graphs) == 0:
        raise ValueError("need at least one graph")
    N = graphs[0].n_vertices
    if any(g.n_vertices != N for g in graphs):
        raise ValueError("graphs have inconsistent vertex counts")
    n = len(graphs)
    stacked = np.stack([g.weights for g in graphs])
    dists = {}
    for i in range(N):
        for j in range(i + 1, N):
            vals, counts = np.unique(stacked[:, i, j], return_counts=True)
            dists[(i, j)] = DiscreteMeasure(vals, counts / n)
    return GraphDistribution(N, dists)


def embed(gd: GraphDistribution) -> DiscreteMeasure:
    """Measure on R^N encoding all edge laws plus the anchor atoms.

    Ordered-pair atoms ``-e_i + t e_j`` carry mass ``p / (N (N+1) (N-1))``;
    anchors ``-e_i`` carry ``1 / (N+1)``. Atoms with ``t == 0`` coincide with
    the anchor ``-e_i`` and their masses merge.
    """
    N = gd.n_vertices
    pair_scale = 1.0 / (N * (N + 1) * (N - 1))
    points = []
    masses = []
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            law = gd.law(i, j)
            for t, p in zip(law.points[:, 0], law.weights):
                point = np.zeros(N)
                point[i] = -1.0
                point[j] += t
                points.append(point)
                masses.append(p * pair_scale)
    for i in range(N):
        anchor = np.zeros(N)
        anchor[i] = -1.0
        points.append(anchor)
        masses.append(1.0 / (N + 1))
    return DiscreteMeasure(np.array(points), np.array(masses))


def permute(gd: GraphDistribution, sigma) -> GraphDistribution:
    """Relabeled model: new edge law of {i, j} is the old law of {s(i), s(j)}.

    The embedding of the result is the pushforward of the original embedding
    under the coordinate permutation ``z -> (z_{s(k)})_k``.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    N = gd.n_vertices
    if sorted(sigma.tolist()) != list(range(N)):
        raise ValueError("sigma is not a permutation of range(N)")
    dists = {}
    for i in range(N):
        for j in range(i + 1, N):
            dists[(i, j)] = gd.law(int(sigma[i]), int(sigma[j]))
    return GraphDistribution(N, dists)


def edge_prob_matrix(gd: GraphDistribution) -> np.ndarray:
    """Edge probabilities of a binary model as a symmetric matrix."""
    N = gd.n_vertices
    P = np.zeros((N, N))
    for (i, j), law in gd.edge_dists.items():
        support = law.points[:, 0]
        if not set(support.tolist()) <= {0.0, 1.0}:
            raise NonBinaryModelError(f"edge ({i}, {j}) has non-binary support {support.tolist()}")
        p = float(law.weights[support == 1.0].sum())
        P[i, j] = P[j, i] = p
    return P
