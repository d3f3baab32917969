# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled network simplex for dense transportation problems.

Mirrors ``transport_py.TransportSolver`` pivot-for-pivot (same entering and
leaving rules, same tie-breaks), so both backends produce bit-identical
bases, flows and duals. This is the hot kernel: the subgradient solver calls
it once per iteration with a slowly varying cost, re-pivoting from the
previous basis.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


class TransportError(RuntimeError):
    """Raised when pivoting fails to terminate; carries residual diagnostics."""


cdef class TransportSolver:
    cdef public Py_ssize_t m, n
    cdef Py_ssize_t nodes
    cdef bint warm
    cdef double[::1] a, b
    cdef long long[::1] arc_row, arc_col
    cdef double[::1] flow
    # scratch
    cdef long long[::1] adj_head, adj_next, adj_other, adj_arc
    cdef long long[::1] parent, parent_arc, depth, order, stack
    cdef double[::1] u, v, balance
    cdef long long[::1] degree
    cdef unsigned char[::1] done_arc, seen
    cdef long long[::1] seg_a, seg_b
    cdef Py_ssize_t len_a, len_b

    def __init__(self, supplies, demands):
        a = np.ascontiguousarray(supplies, dtype=np.float64)
        b = np.ascontiguousarray(demands, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1 or len(a) == 0 or len(b) == 0:
            raise ValueError("supplies and demands must be nonempty 1-D arrays")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("supplies and demands must be nonnegative")
        if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, a.sum()):
            raise ValueError("supplies and demands must balance")
        self.m = a.shape[0]
        self.n = b.shape[0]
        self.a = a
        self.b = b
        self.nodes = self.m + self.n
        self.warm = False
        cdef Py_ssize_t nb = self.nodes - 1
        self.arc_row = np.empty(nb, dtype=np.int64)
        self.arc_col = np.empty(nb, dtype=np.int64)
        self.flow = np.empty(nb, dtype=np.float64)
        self.adj_head = np.empty(self.nodes, dtype=np.int64)
        self.adj_next = np.empty(2 * nb, dtype=np.int64)
        self.adj_other = np.empty(2 * nb, dtype=np.int64)
        self.adj_arc = np.empty(2 * nb, dtype=np.int64)
        self.parent = np.empty(self.nodes, dtype=np.int64)
        self.parent_arc = np.empty(self.nodes, dtype=np.int64)
        self.depth = np.empty(self.nodes, dtype=np.int64)
        self.order = np.empty(self.nodes, dtype=np.int64)
        self.stack = np.empty(self.nodes, dtype=np.int64)
        self.u = np.empty(self.m, dtype=np.float64)
        self.v = np.empty(self.n, dtype=np.float64)
        self.balance = np.empty(self.nodes, dtype=np.float64)
        self.degree = np.empty(self.nodes, dtype=np.int64)
        self.done_arc = np.empty(nb, dtype=np.uint8)
        self.seen = np.empty(self.nodes, dtype=np.uint8)
        self.seg_a = np.empty(self.nodes, dtype=np.int64)
        self.seg_b = np.empty(self.nodes, dtype=np.int64)

    def reset(self):
        self.warm = False

    cdef void _northwest_corner(self):
        cdef Py_ssize_t m = self.m, n = self.n, i = 0, j = 0, t
        cdef double q
        cdef double[::1] ra = self.a.copy()
        cdef double[::1] rb = self.b.copy()
        for t in range(m + n - 1):
            q = ra[i] if ra[i] < rb[j] else rb[j]
            self.arc_row[t] = i
            self.arc_col[t] = j
            self.flow[t] = q
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
        self.warm = True

    cdef int _tree_structure(self) except -1:
        cdef Py_ssize_t nodes = self.nodes, t, e, x, o, top, cnt
        for x in range(nodes):
            self.adj_head[x] = -1
        cdef Py_ssize_t r, c
        for t in range(nodes - 1):
            r = <Py_ssize_t> self.arc_row[t]
            c = <Py_ssize_t> self.arc_col[t] + self.m
            e = 2 * t
            self.adj_other[e] = c
            self.adj_arc[e] = t
            self.adj_next[e] = self.adj_head[r]
            self.adj_head[r] = e
            e = 2 * t + 1
            self.adj_other[e] = r
            self.adj_arc[e] = t
            self.adj_next[e] = self.adj_head[c]
            self.adj_head[c] = e
        for x in range(nodes):
            self.parent[x] = -1
            self.parent_arc[x] = -1
            self.depth[x] = 0
        self.stack[0] = 0
        top = 1
        cnt = 0
        for x in range(nodes):
            self.seen[x] = 0
        self.seen[0] = 1
        cdef long long ee
        while top > 0:
            top -= 1
            x = <Py_ssize_t> self.stack[top]
            self.order[cnt] = x
            cnt += 1
            ee = self.adj_head[x]
            while ee != -1:
                o = <Py_ssize_t> self.adj_other[ee]
                if self.seen[o] == 0:
                    self.seen[o] = 1
                    self.parent[o] = x
                    self.parent_arc[o] = self.adj_arc[ee]
                    self.depth[o] = self.depth[x] + 1
                    self.stack[top] = o
                    top += 1
                ee = self.adj_next[ee]
        if cnt != nodes:
            raise TransportError("basis is not a spanning tree")
        return 0

    cdef void _potentials(self, double[:, ::1] C):
        cdef Py_ssize_t k, x, t, r, c
        self.u[0] = 0.0
        for k in range(1, self.nodes):
            x = <Py_ssize_t> self.order[k]
            t = <Py_ssize_t> self.parent_arc[x]
            r = <Py_ssize_t> self.arc_row[t]
            c = <Py_ssize_t> self.arc_col[t]
            if x < self.m:
                self.u[x] = C[r, c] - self.v[c]
            else:
                self.v[x - self.m] = C[r, c] - self.u[r]

    def solve(self, cost):
        """Pivot to optimality for ``cost``; returns basis arcs, flows, duals."""
        C = np.ascontiguousarray(cost, dtype=np.float64)
        if C.shape != (self.m, self.n):
            raise ValueError("cost shape mismatch")
        if not np.all(np.isfinite(C)):
            raise ValueError("cost must be finite")
        try:
            pivots = self._pivot_loop(C)
        except TransportError:
            if not self.warm:
                raise
            self.reset()
            pivots = self._pivot_loop(C)
        self._recompute_flows()
        self._tree_structure()
        self._potentials(C)
        return (
            np.asarray(self.arc_row).copy(),
            np.asarray(self.arc_col).copy(),
            np.asarray(self.flow).copy(),
            np.asarray(self.u).copy(),
            np.asarray(self.v).copy(),
            pivots,
        )

    cdef long long _pivot_loop(self, double[:, ::1] C) except -1:
        if not self.warm:
            self._northwest_corner()
        cdef Py_ssize_t m = self.m, n = self.n, i, j, ei, ej
        cdef double cmax = 0.0, red, best
        for i in range(m):
            for j in range(n):
                if C[i, j] > cmax:
                    cmax = C[i, j]
                elif -C[i, j] > cmax:
                    cmax = -C[i, j]
        cdef double eps = 1e-11 * (1.0 + cmax)
        cdef long long max_pivots = 10000 + 100 * self.nodes * self.nodes
        cdef bint bland = False, found
        cdef long long streak = 0, pivots = 0
        cdef double theta
        cdef long long leave
        while True:
            self._tree_structure()
            self._potentials(C)
            found = False
            best = -eps
            ei = -1
            ej = -1
            if bland:
                for i in range(m):
                    if found:
                        break
                    for j in range(n):
                        red = C[i, j] - self.u[i] - self.v[j]
                        if red < -eps:
                            ei = i
                            ej = j
                            found = True
                            break
            else:
                for i in range(m):
                    for j in range(n):
                        red = C[i, j] - self.u[i] - self.v[j]
                        if red < best:
                            best = red
                            ei = i
                            ej = j
                            found = True
            if not found:
                return pivots
            theta = self._cycle_min(ei, ej, &leave)
            if leave < 0:
                raise TransportError("entering arc closes no cycle")
            self._apply_pivot(ei, ej, theta, leave)
            pivots += 1
            if theta > 0.0:
                streak = 0
                bland = False
            else:
                streak += 1
                if streak > 2 * self.nodes:
                    bland = True
            if pivots > max_pivots:
                raise TransportError(f"no convergence after {pivots} pivots")

    cdef double _cycle_min(self, Py_ssize_t ei, Py_ssize_t ej, long long* leave):
        cdef Py_ssize_t xa = ei, xb = self.m + ej, t
        cdef Py_ssize_t pos
        self.len_a = 0
        self.len_b = 0
        while self.depth[xa] > self.depth[xb]:
            self.seg_a[self.len_a] = self.parent_arc[xa]
            self.len_a += 1
            xa = <Py_ssize_t> self.parent[xa]
        while self.depth[xb] > self.depth[xa]:
            self.seg_b[self.len_b] = self.parent_arc[xb]
            self.len_b += 1
            xb = <Py_ssize_t> self.parent[xb]
        while xa != xb:
            self.seg_a[self.len_a] = self.parent_arc[xa]
            self.len_a += 1
            xa = <Py_ssize_t> self.parent[xa]
            self.seg_b[self.len_b] = self.parent_arc[xb]
            self.len_b += 1
            xb = <Py_ssize_t> self.parent[xb]
        cdef double theta = np.inf
        cdef double f
        cdef long long key, leave_key = -1
        leave[0] = -1
        for pos in range(0, self.len_a, 2):
            t = <Py_ssize_t> self.seg_a[pos]
            f = self.flow[t]
            key = self.arc_row[t] * self.n + self.arc_col[t]
            if f < theta or (f == theta and (leave_key == -1 or key < leave_key)):
                theta = f
                leave[0] = t
                leave_key = key
        for pos in range(0, self.len_b, 2):
            t = <Py_ssize_t> self.seg_b[pos]
            f = self.flow[t]
            key = self.arc_row[t] * self.n + self.arc_col[t]
            if f < theta or (f == theta and (leave_key == -1 or key < leave_key)):
                theta = f
                leave[0] = t
                leave_key = key
        return theta

    cdef void _apply_pivot(self, Py_ssize_t ei, Py_ssize_t ej, double theta, long long leave):
        cdef Py_ssize_t pos, t
        for pos in range(self.len_a):
            t = <Py_ssize_t> self.seg_a[pos]
            if pos % 2 == 0:
                self.flow[t] -= theta
            else:
                self.flow[t] += theta
        for pos in range(self.len_b):
            t = <Py_ssize_t> self.seg_b[pos]
            if pos % 2 == 0:
                self.flow[t] -= theta
            else:
                self.flow[t] += theta
        self.arc_row[leave] = ei
        self.arc_col[leave] = ej
        self.flow[leave] = theta

    cdef void _recompute_flows(self):
        cdef Py_ssize_t nodes = self.nodes, x, t, r, c, o, top
        for x in range(self.m):
            self.balance[x] = self.a[x]
        for x in range(self.n):
            self.balance[self.m + x] = self.b[x]
        for x in range(nodes):
            self.degree[x] = 0
        for t in range(nodes - 1):
            self.done_arc[t] = 0
            self.degree[<Py_ssize_t> self.arc_row[t]] += 1
            self.degree[<Py_ssize_t> self.arc_col[t] + self.m] += 1
        top = 0
        for x in range(nodes):
            if self.degree[x] == 1:
                self.stack[top] = x
                top += 1
        while top > 0:
            top -= 1
            x = <Py_ssize_t> self.stack[top]
            if self.degree[x] != 1:
                continue
            for t in range(nodes - 1):
                if self.done_arc[t]:
                    continue
                r = <Py_ssize_t> self.arc_row[t]
                c = <Py_ssize_t> self.arc_col[t] + self.m
                if r == x or c == x:
                    o = c if x == r else r
                    self.flow[t] = self.balance[x]
                    self.balance[o] -= self.balance[x]
                    self.balance[x] = 0.0
                    self.done_arc[t] = 1
                    self.degree[x] -= 1
                    self.degree[o] -= 1
                    if self.degree[o] == 1:
                        self.stack[top] = o
                        top += 1
                    break
