"""Pure-Python network simplex for dense transportation problems.

Reference implementation of the compiled kernel in ``transport.pyx``; the two
are kept step-for-step identical (same pivot rules, same tie-breaks) so that
results are bit-equal across backends. Selected at import time by
``gwstat._kernels`` when the compiled extension is unavailable or when
``GW_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


class TransportError(RuntimeError):
    """Raised when pivoting fails to terminate; carries residual diagnostics."""


class TransportSolver:
    """Primal network simplex on the bipartite transportation graph.

    The basis (a spanning tree of rows + cols) persists across ``solve``
    calls, so repeated solves with the same marginals and slowly varying
    costs re-pivot from the previous optimum. Entering arcs are chosen by
    most-negative reduced cost; after a long degenerate streak the rule
    switches to Bland's (first negative, row-major) until the objective
    strictly improves, which guarantees termination. Final flows are
    recomputed exactly from the tree by leaf elimination, so marginal
    residuals do not accumulate across warm starts.
    """

    def __init__(self, supplies, demands):
        a = np.ascontiguousarray(supplies, dtype=np.float64)
        b = np.ascontiguousarray(demands, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1 or len(a) == 0 or len(b) == 0:
            raise ValueError("supplies and demands must be nonempty 1-D arrays")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("supplies and demands must be nonnegative")
        if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, a.sum()):
            raise ValueError("supplies and demands must balance")
        self.m = len(a)
        self.n = len(b)
        self.a = a
        self.b = b
        self._nodes = self.m + self.n
        self._warm = False
        self._arc_row = np.empty(self._nodes - 1, dtype=np.int64)
        self._arc_col = np.empty(self._nodes - 1, dtype=np.int64)
        self._flow = np.empty(self._nodes - 1, dtype=np.float64)

    def reset(self) -> None:
        self._warm = False

    # -- basis initialization -------------------------------------------------

    def _northwest_corner(self) -> None:
        m, n = self.m, self.n
        ra = self.a.copy()
        rb = self.b.copy()
        i = j = 0
        for t in range(m + n - 1):
            q = min(ra[i], rb[j])
            self._arc_row[t] = i
            self._arc_col[t] = j
            self._flow[t] = q
            ra[i] -= q
            rb[j] -= q
            if i == m - 1:
                j += 1
            elif j == n - 1:
                i += 1
            elif ra[i] <= rb[j]:
                i += 1
            else:
                j += 1
        self._warm = True

    # -- tree utilities -------------------------------------------------------

    def _tree_structure(self):
        """Parents, parent arcs and depths from a DFS rooted at row node 0."""
        nodes = self._nodes
        adj_head = np.full(nodes, -1, dtype=np.int64)
        adj_next = np.empty(2 * (nodes - 1), dtype=np.int64)
        adj_other = np.empty(2 * (nodes - 1), dtype=np.int64)
        adj_arc = np.empty(2 * (nodes - 1), dtype=np.int64)
        for t in range(nodes - 1):
            r = int(self._arc_row[t])
            c = int(self._arc_col[t]) + self.m
            e = 2 * t
            adj_other[e] = c
            adj_arc[e] = t
            adj_next[e] = adj_head[r]
            adj_head[r] = e
            e = 2 * t + 1
            adj_other[e] = r
            adj_arc[e] = t
            adj_next[e] = adj_head[c]
            adj_head[c] = e

        parent = np.full(nodes, -1, dtype=np.int64)
        parent_arc = np.full(nodes, -1, dtype=np.int64)
        depth = np.zeros(nodes, dtype=np.int64)
        seen = np.zeros(nodes, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            x = stack.pop()
            e = adj_head[x]
            while e != -1:
                o = int(adj_other[e])
                if not seen[o]:
                    seen[o] = True
                    parent[o] = x
                    parent_arc[o] = adj_arc[e]
                    depth[o] = depth[x] + 1
                    stack.append(o)
                e = adj_next[e]
        if not seen.all():
            raise TransportError("basis is not a spanning tree")
        return parent, parent_arc, depth

    def _potentials(self, cost, parent, parent_arc, depth):
        u = np.empty(self.m)
        v = np.empty(self.n)
        u[0] = 0.0
        order = np.argsort(depth, kind="stable")
        for x in order[1:]:
            t = parent_arc[x]
            r = int(self._arc_row[t])
            c = int(self._arc_col[t])
            if x < self.m:
                u[x] = cost[r, c] - v[c]
            else:
                v[x - self.m] = cost[r, c] - u[r]
        return u, v

    # -- pivoting -------------------------------------------------------------

    def solve(self, cost):
        """Pivot to optimality for ``cost``; returns basis arcs, flows, duals.

        Returns ``(rows, cols, flows, u, v, pivots)`` where the first three
        describe the optimal basic solution (flows may contain exact zeros)
        and ``u``, ``v`` are dual row/col potentials with
        ``u_i + v_j <= cost_ij`` up to the pricing tolerance.
        """
        C = np.ascontiguousarray(cost, dtype=np.float64)
        if C.shape != (self.m, self.n):
            raise ValueError("cost shape mismatch")
        if not np.all(np.isfinite(C)):
            raise ValueError("cost must be finite")
        try:
            pivots = self._pivot_loop(C)
        except TransportError:
            if not self._warm:
                raise
            self.reset()
            pivots = self._pivot_loop(C)
        self._recompute_flows()
        parent, parent_arc, depth = self._tree_structure()
        u, v = self._potentials(C, parent, parent_arc, depth)
        return (
            self._arc_row.copy(),
            self._arc_col.copy(),
            self._flow.copy(),
            u,
            v,
            pivots,
        )

    def _pivot_loop(self, C) -> int:
        if not self._warm:
            self._northwest_corner()
        m, n = self.m, self.n
        eps = 1e-11 * (1.0 + float(np.max(np.abs(C))))
        max_pivots = 10000 + 100 * self._nodes * self._nodes
        bland = False
        streak = 0
        pivots = 0
        while True:
            parent, parent_arc, depth = self._tree_structure()
            u, v = self._potentials(C, parent, parent_arc, depth)
            red = C - u[:, None] - v[None, :]
            if bland:
                neg = np.flatnonzero(red.ravel() < -eps)
                if len(neg) == 0:
                    return pivots
                flat = int(neg[0])
            else:
                flat = int(np.argmin(red.ravel()))
                if red.ravel()[flat] >= -eps:
                    return pivots
            ei, ej = divmod(flat, n)

            theta, leave = self._cycle_min(ei, ej, parent, parent_arc, depth)
            self._apply_pivot(ei, ej, theta, leave, parent, parent_arc, depth)
            pivots += 1
            if theta > 0.0:
                streak = 0
                bland = False
            else:
                streak += 1
                if streak > 2 * self._nodes:
                    bland = True
            if pivots > max_pivots:
                raise TransportError(
                    f"no convergence after {pivots} pivots "
                    f"(min reduced cost {float(red.min()):.3e})"
                )

    def _path_arcs(self, node, stop_depth, parent, parent_arc, depth):
        arcs = []
        x = node
        while depth[x] > stop_depth:
            arcs.append(int(parent_arc[x]))
            x = int(parent[x])
        return arcs, x

    def _cycle_min(self, ei, ej, parent, parent_arc, depth):
        """Min flow over the leaving-candidate arcs of the entering cycle.

        Candidates sit at even offsets from either endpoint along the tree
        path (those arcs lose flow when the entering arc gains). Ties break
        toward the smallest row-major arc position for determinism.
        """
        na, nb = ei, self.m + ej
        seg_a, seg_b = [], []
        xa, xb = na, nb
        while depth[xa] > depth[xb]:
            seg_a.append(int(parent_arc[xa]))
            xa = int(parent[xa])
        while depth[xb] > depth[xa]:
            seg_b.append(int(parent_arc[xb]))
            xb = int(parent[xb])
        while xa != xb:
            seg_a.append(int(parent_arc[xa]))
            xa = int(parent[xa])
            seg_b.append(int(parent_arc[xb]))
            xb = int(parent[xb])
        theta = np.inf
        leave = -1
        leave_key = -1
        for seg in (seg_a, seg_b):
            for pos in range(0, len(seg), 2):
                t = seg[pos]
                f = self._flow[t]
                key = int(self._arc_row[t]) * self.n + int(self._arc_col[t])
                if f < theta or (f == theta and (leave_key == -1 or key < leave_key)):
                    theta = f
                    leave = t
                    leave_key = key
        if leave < 0:
            raise TransportError("entering arc closes no cycle")
        self._seg_a = seg_a
        self._seg_b = seg_b
        return theta, leave

    def _apply_pivot(self, ei, ej, theta, leave, parent, parent_arc, depth):
        for seg in (self._seg_a, self._seg_b):
            for pos, t in enumerate(seg):
                if pos % 2 == 0:
                    self._flow[t] -= theta
                else:
                    self._flow[t] += theta
        self._arc_row[leave] = ei
        self._arc_col[leave] = ej
        self._flow[leave] = theta

    # -- exact flow recovery ----------------------------------------------------

    def _recompute_flows(self) -> None:
        nodes = self._nodes
        balance = np.concatenate([self.a, self.b])
        degree = np.zeros(nodes, dtype=np.int64)
        incident = [[] for _ in range(nodes)]
        for t in range(nodes - 1):
            r = int(self._arc_row[t])
            c = int(self._arc_col[t]) + self.m
            degree[r] += 1
            degree[c] += 1
            incident[r].append(t)
            incident[c].append(t)
        done_arc = np.zeros(nodes - 1, dtype=bool)
        stack = [x for x in range(nodes) if degree[x] == 1]
        while stack:
            x = stack.pop()
            if degree[x] != 1:
                continue
            t = next(tt for tt in incident[x] if not done_arc[tt])
            r = int(self._arc_row[t])
            c = int(self._arc_col[t]) + self.m
            o = c if x == r else r
            self._flow[t] = balance[x]
            balance[o] -= balance[x]
            balance[x] = 0.0
            done_arc[t] = True
            degree[x] -= 1
            degree[o] -= 1
            if degree[o] == 1:
                stack.append(o)
