# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RA kernels. Same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort
from libc.math cimport INFINITY

cnp.import_array()

DEF TRAIN = 1
DEF NONEXISTENT = 0
DEF SENSITIVE = 2


cdef int _cmp_i64(const void *a, const void *b) noexcept nogil:
    cdef long long x = (<long long *>a)[0]
    cdef long long y = (<long long *>b)[0]
    return (x > y) - (x < y)


def weighted_cn_matrix(adj, weights):
    cdef cnp.uint8_t[:, ::1] A = np.ascontiguousarray(adj, dtype=np.uint8)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0]
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t[::1] nb = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t z, i, j, k, a, b
    cdef double wz
    with nogil:
        for z in range(n):
            k = 0
            for i in range(n):
                if A[z, i]:
                    nb[k] = i
                    k += 1
            if k < 2:
                continue
            wz = w[z]
            for i in range(k):
                a = nb[i]
                for j in range(i + 1, k):
                    b = nb[j]
                    out[a, b] += wz
                    out[b, a] += wz
    return out_arr


def inverse_degrees(deg):
    deg = np.asarray(deg)
    inv = np.zeros(deg.shape[0], dtype=np.float64)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz].astype(np.float64)
    return inv


def ra_matrix(adj):
    adj = np.ascontiguousarray(adj, dtype=np.uint8)
    return weighted_cn_matrix(adj, inverse_degrees(adj.sum(axis=1, dtype=np.int64)))


cdef class RAState:
    cdef public Py_ssize_t n
    cdef cnp.uint8_t[:, ::1] adj0
    cdef cnp.uint8_t[:, ::1] adj
    cdef long long[::1] deg0
    cdef long long[::1] deg
    cdef double[::1] inv0
    cdef double[::1] inv
    cdef int[:, ::1] nbr0
    cdef int[:, ::1] nbr
    cdef int[:, ::1] stamp
    cdef int[::1] node_stamp
    cdef int epoch
    cdef long long[::1] codes
    cdef Py_ssize_t n_codes
    cdef int[::1] touched
    cdef Py_ssize_t n_touched
    cdef int[::1] ubuf
    # fitness context
    cdef public bint has_context
    cdef double[:, ::1] base_ra
    cdef cnp.uint8_t[:, ::1] cls
    cdef long long[::1] val_u
    cdef long long[::1] val_v
    cdef double[::1] n_sorted
    cdef double sum_n
    cdef double sum_v
    cdef double[::1] newvals

    def __init__(self, adj):
        a = np.ascontiguousarray(adj, dtype=np.uint8)
        self.n = a.shape[0]
        self.adj0 = a.copy()
        self.adj = a.copy()
        d = a.sum(axis=1, dtype=np.int64)
        self.deg0 = d.astype(np.int64)
        self.deg = d.astype(np.int64).copy()
        self.inv0 = inverse_degrees(d)
        self.inv = inverse_degrees(d).copy()
        nbr = np.zeros((self.n, max(self.n, 1)), dtype=np.int32)
        for u in range(self.n):
            row = np.flatnonzero(a[u])
            nbr[u, :row.shape[0]] = row
        self.nbr0 = nbr
        self.nbr = nbr.copy()
        self.stamp = np.zeros((self.n, self.n), dtype=np.int32)
        self.node_stamp = np.zeros(self.n, dtype=np.int32)
        self.epoch = 0
        self.codes = np.zeros(16, dtype=np.int64)
        self.touched = np.zeros(max(self.n, 1), dtype=np.int32)
        self.ubuf = np.zeros(max(self.n, 1), dtype=np.int32)
        self.newvals = np.zeros(16, dtype=np.float64)
        self.has_context = False

    cdef int _next_epoch(self):
        self.epoch += 1
        if self.epoch >= 2000000000:
            self.stamp[:, :] = 0
            self.node_stamp[:] = 0
            self.epoch = 1
        return self.epoch

    cdef void _rebuild_row(self, Py_ssize_t u) noexcept nogil:
        cdef Py_ssize_t z, k = 0
        for z in range(self.n):
            if self.adj[u, z]:
                self.nbr[u, k] = <int>z
                k += 1

    cdef void _toggle(self, long long[:, ::1] d, long long[:, ::1] a):
        cdef Py_ssize_t i, x
        cdef long long u, v
        cdef int ep = self._next_epoch()
        self.n_touched = 0
        for i in range(d.shape[0]):
            u = d[i, 0]; v = d[i, 1]
            self.adj[u, v] = 0; self.adj[v, u] = 0
            self.deg[u] -= 1; self.deg[v] -= 1
            self._touch(u, ep); self._touch(v, ep)
        for i in range(a.shape[0]):
            u = a[i, 0]; v = a[i, 1]
            self.adj[u, v] = 1; self.adj[v, u] = 1
            self.deg[u] += 1; self.deg[v] += 1
            self._touch(u, ep); self._touch(v, ep)
        for i in range(self.n_touched):
            x = self.touched[i]
            self.inv[x] = 1.0 / <double>self.deg[x] if self.deg[x] > 0 else 0.0
            self._rebuild_row(x)

    cdef inline void _touch(self, long long x, int ep):
        if self.node_stamp[x] != ep:
            self.node_stamp[x] = ep
            self.touched[self.n_touched] = <int>x
            self.n_touched += 1

    cdef void _restore(self, long long[:, ::1] d, long long[:, ::1] a):
        cdef Py_ssize_t i, x, k
        cdef long long u, v
        for i in range(d.shape[0]):
            u = d[i, 0]; v = d[i, 1]
            self.adj[u, v] = 1; self.adj[v, u] = 1
        for i in range(a.shape[0]):
            u = a[i, 0]; v = a[i, 1]
            self.adj[u, v] = 0; self.adj[v, u] = 0
        for i in range(self.n_touched):
            x = self.touched[i]
            self.deg[x] = self.deg0[x]
            self.inv[x] = self.inv0[x]
            for k in range(self.deg0[x]):
                self.nbr[x, k] = self.nbr0[x, k]

    cdef inline double _ra(self, long long u, long long v) noexcept nogil:
        cdef long long a = u, b = v, k, z
        cdef double s = 0.0
        if self.deg[v] < self.deg[u]:
            a = v; b = u
        for k in range(self.deg[a]):
            z = self.nbr[a, k]
            if self.adj[b, z]:
                s += self.inv[z]
        return s

    cdef void _push(self, long long code):
        if self.n_codes == self.codes.shape[0]:
            grown = np.zeros(2 * self.codes.shape[0], dtype=np.int64)
            grown[:self.n_codes] = np.asarray(self.codes)
            self.codes = grown
        self.codes[self.n_codes] = code
        self.n_codes += 1

    cdef void _collect_affected(self, long long[:, ::1] d, long long[:, ::1] a):
        """Fill ``codes`` with sorted, deduplicated ``u*n+v`` of affected pairs."""
        cdef Py_ssize_t i, j, t, z, ku
        cdef long long x, u, v, p, q
        cdef long long n = self.n
        cdef int ep = self._next_epoch()
        self.n_codes = 0
        for t in range(d.shape[0] + a.shape[0]):
            if t < d.shape[0]:
                u = d[t, 0]; v = d[t, 1]
            else:
                u = a[t - d.shape[0], 0]; v = a[t - d.shape[0], 1]
            if u > v:
                u, v = v, u
            if self.stamp[u, v] != ep:
                self.stamp[u, v] = ep
                self._push(u * n + v)
        for t in range(self.n_touched):
            x = self.touched[t]
            ku = 0
            for z in range(n):
                if self.adj0[x, z] or self.adj[x, z]:
                    self.ubuf[ku] = <int>z
                    ku += 1
            for i in range(ku):
                p = self.ubuf[i]
                for j in range(i + 1, ku):
                    q = self.ubuf[j]
                    if self.stamp[p, q] != ep:
                        self.stamp[p, q] = ep
                        self._push(p * n + q)
        qsort(&self.codes[0], self.n_codes, sizeof(long long), _cmp_i64)

    @staticmethod
    def _as_pairs(pairs):
        return np.ascontiguousarray(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))

    def affected(self, del_pairs, add_pairs):
        cdef long long[:, ::1] d = self._as_pairs(del_pairs)
        cdef long long[:, ::1] a = self._as_pairs(add_pairs)
        self._toggle(d, a)
        try:
            self._collect_affected(d, a)
            codes = np.asarray(self.codes[:self.n_codes]).copy()
        finally:
            self._restore(d, a)
        return np.stack([codes // self.n, codes % self.n], axis=1).astype(np.int64)

    def rescore(self, del_pairs, add_pairs, pairs):
        cdef long long[:, ::1] d = self._as_pairs(del_pairs)
        cdef long long[:, ::1] a = self._as_pairs(add_pairs)
        cdef long long[:, ::1] p = self._as_pairs(pairs)
        out_arr = np.zeros(p.shape[0], dtype=np.float64)
        cdef double[::1] out = out_arr
        cdef Py_ssize_t i
        self._toggle(d, a)
        try:
            for i in range(p.shape[0]):
                out[i] = self._ra(p[i, 0], p[i, 1])
        finally:
            self._restore(d, a)
        return out_arr

    def set_fitness_context(self, base_ra, cls, val_pairs, n_sorted, sum_n, sum_v):
        self.base_ra = np.ascontiguousarray(base_ra, dtype=np.float64)
        self.cls = np.ascontiguousarray(cls, dtype=np.uint8)
        vp = np.asarray(val_pairs, dtype=np.int64).reshape(-1, 2)
        self.val_u = np.ascontiguousarray(vp[:, 0])
        self.val_v = np.ascontiguousarray(vp[:, 1])
        self.n_sorted = np.ascontiguousarray(n_sorted, dtype=np.float64)
        self.sum_n = float(sum_n)
        self.sum_v = float(sum_v)
        self.has_context = True

    def fitness(self, del_pairs, add_pairs, double alpha):
        if not self.has_context:
            raise RuntimeError("fitness context not set")
        cdef long long[:, ::1] d = self._as_pairs(del_pairs)
        cdef long long[:, ::1] a = self._as_pairs(add_pairs)
        cdef Py_ssize_t i, lo, hi, mid, n_n
        cdef long long u, v, code, n = self.n
        cdef unsigned char c
        cdef bint present
        cdef double val, b, max_v, sum_v, dsum
        cdef long long count
        cdef Py_ssize_t rescored = 0
        self._toggle(d, a)
        try:
            self._collect_affected(d, a)
            if self.newvals.shape[0] < self.n_codes:
                self.newvals = np.zeros(2 * self.n_codes, dtype=np.float64)
            # pass 1: rescore affected pairs that stay in the scored sets
            for i in range(self.n_codes):
                code = self.codes[i]
                u = code // n; v = code % n
                c = self.cls[u, v]
                present = self.adj[u, v] != 0
                if present and (c == TRAIN or c == NONEXISTENT):
                    continue
                self.newvals[i] = self._ra(u, v)
                self.stamp[u, v] = -self.stamp[u, v]  # mark as rescored
                rescored += 1
            # sensitive set: max and sum with patched values
            sum_v = 0.0
            max_v = -INFINITY
            for i in range(self.val_u.shape[0]):
                u = self.val_u[i]; v = self.val_v[i]
                val = self.base_ra[u, v]
                if self.stamp[u, v] < 0:
                    val = self._lookup(u * n + v)
                sum_v += val
                if val > max_v:
                    max_v = val
            n_n = self.n_sorted.shape[0]
            lo = 0; hi = n_n
            while lo < hi:
                mid = (lo + hi) // 2
                if self.n_sorted[mid] <= max_v:
                    lo = mid + 1
                else:
                    hi = mid
            count = n_n - lo
            dsum = 0.0
            for i in range(self.n_codes):
                code = self.codes[i]
                u = code // n; v = code % n
                if self.stamp[u, v] >= 0:
                    continue
                c = self.cls[u, v]
                val = self.newvals[i]
                if c == NONEXISTENT:
                    b = self.base_ra[u, v]
                    dsum += val - b
                    count += (val > max_v) - (b > max_v)
                elif c == TRAIN:
                    dsum += val
                    count += (val > max_v)
            for i in range(self.n_codes):
                code = self.codes[i]
                u = code // n; v = code % n
                if self.cls[u, v] == NONEXISTENT and self.adj[u, v]:
                    b = self.base_ra[u, v]
                    dsum -= b
                    count -= (b > max_v)
            for i in range(self.n_codes):
                code = self.codes[i]
                u = code // n; v = code % n
                if self.stamp[u, v] < 0:
                    self.stamp[u, v] = -self.stamp[u, v]
        finally:
            self._restore(d, a)
        mean_n = (self.sum_n + dsum) / n_n
        mean_v = sum_v / self.val_u.shape[0]
        return alpha * count + (mean_n - mean_v), int(count), mean_n, mean_v, int(rescored)

    cdef double _lookup(self, long long code):
        cdef Py_ssize_t lo = 0, hi = self.n_codes, mid
        while lo < hi:
            mid = (lo + hi) // 2
            if self.codes[mid] < code:
                lo = mid + 1
            else:
                hi = mid
        return self.newvals[lo]
