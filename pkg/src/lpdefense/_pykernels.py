"""Pure numpy implementation of the RA kernels.

Mirrors ``_ckernels.pyx`` operation for operation. Every RA value is a sum
of ``1/d_z`` over common neighbours ``z`` taken in ascending ``z``, so the
full-matrix path and the per-pair incremental path produce bit-identical
floats.
"""

import numpy as np

TRAIN, NONEXISTENT, SENSITIVE, DIAGONAL = 1, 0, 2, 3


def weighted_cn_matrix(adj, weights):
    """``M[u, v] = sum_z adj[u, z] * adj[v, z] * weights[z]``, accumulated in ascending z."""
    adj = np.ascontiguousarray(adj, dtype=np.uint8)
    n = adj.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    for z in range(n):
        nb = np.flatnonzero(adj[z])
        if nb.size < 2:
            continue
        w = weights[z]
        block = out[np.ix_(nb, nb)]
        block += w
        out[np.ix_(nb, nb)] = block
    np.fill_diagonal(out, 0.0)
    return out


def inverse_degrees(deg):
    deg = np.asarray(deg)
    inv = np.zeros(deg.shape[0], dtype=np.float64)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz].astype(np.float64)
    return inv


def ra_matrix(adj):
    adj = np.ascontiguousarray(adj, dtype=np.uint8)
    return weighted_cn_matrix(adj, inverse_degrees(adj.sum(axis=1, dtype=np.int64)))


class RAState:
    """Base training graph plus scratch space for scoring perturbed copies.

    Not safe for concurrent use: evaluations toggle a working copy in place
    and restore it before returning.
    """

    def __init__(self, adj):
        self.adj0 = np.ascontiguousarray(adj, dtype=np.uint8).copy()
        self.n = self.adj0.shape[0]
        self.deg0 = self.adj0.sum(axis=1, dtype=np.int64)
        self.inv0 = inverse_degrees(self.deg0)
        self.has_context = False

    # -- perturbed graph -------------------------------------------------
    def _perturbed(self, del_pairs, add_pairs):
        adj = self.adj0.copy()
        d = np.asarray(del_pairs, dtype=np.int64).reshape(-1, 2)
        a = np.asarray(add_pairs, dtype=np.int64).reshape(-1, 2)
        adj[d[:, 0], d[:, 1]] = 0
        adj[d[:, 1], d[:, 0]] = 0
        adj[a[:, 0], a[:, 1]] = 1
        adj[a[:, 1], a[:, 0]] = 1
        deg = adj.sum(axis=1, dtype=np.int64)
        return adj, inverse_degrees(deg), d, a

    def _affected_codes(self, adj, d, a):
        n = self.n
        toggled = np.concatenate([d, a])
        if toggled.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        chunks = [np.minimum(toggled[:, 0], toggled[:, 1]) * n + np.maximum(toggled[:, 0], toggled[:, 1])]
        for x in np.unique(toggled.ravel()):
            nb = np.flatnonzero(self.adj0[x] | adj[x])
            if nb.size >= 2:
                iu, iv = np.triu_indices(nb.size, k=1)
                chunks.append(nb[iu] * n + nb[iv])
        return np.unique(np.concatenate(chunks))

    @staticmethod
    def _ra_pairs(adj, inv, us, vs):
        out = np.zeros(us.shape[0], dtype=np.float64)
        if us.shape[0] == 0:
            return out
        ru = adj[us]
        rv = adj[vs]
        both = ru & rv
        for z in np.flatnonzero(both.any(axis=0)):
            col = both[:, z]
            out[col.astype(bool)] += inv[z]
        return out

    def affected(self, del_pairs, add_pairs):
        adj, _, d, a = self._perturbed(del_pairs, add_pairs)
        codes = self._affected_codes(adj, d, a)
        return np.stack([codes // self.n, codes % self.n], axis=1).astype(np.int64)

    def rescore(self, del_pairs, add_pairs, pairs):
        adj, inv, _, _ = self._perturbed(del_pairs, add_pairs)
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return self._ra_pairs(adj, inv, p[:, 0], p[:, 1])

    # -- fitness -----------------------------------------------------------
    def set_fitness_context(self, base_ra, cls, val_pairs, n_sorted, sum_n, sum_v):
        self.base_ra = np.ascontiguousarray(base_ra, dtype=np.float64)
        self.cls = np.ascontiguousarray(cls, dtype=np.uint8)
        vp = np.asarray(val_pairs, dtype=np.int64).reshape(-1, 2)
        self.val_u, self.val_v = vp[:, 0].copy(), vp[:, 1].copy()
        self.n_sorted = np.ascontiguousarray(n_sorted, dtype=np.float64)
        self.sum_n = float(sum_n)
        self.sum_v = float(sum_v)
        self.has_context = True

    def fitness(self, del_pairs, add_pairs, alpha):
        """Return ``(fitness, count_term, mean_nonexistent, mean_sensitive, n_rescored)``."""
        if not self.has_context:
            raise RuntimeError("fitness context not set")
        n = self.n
        adj, inv, d, a = self._perturbed(del_pairs, add_pairs)
        codes = self._affected_codes(adj, d, a)
        us, vs = codes // n, codes % n
        cls = self.cls[us, vs]
        present = adj[us, vs].astype(bool)
        # still-present training edges and freshly added pairs leave the scored sets
        todo = ~((cls == TRAIN) & present) & ~((cls == NONEXISTENT) & present)
        us_t, vs_t, cls_t = us[todo], vs[todo], cls[todo]
        new = self._ra_pairs(adj, inv, us_t, vs_t)
        base = self.base_ra[us_t, vs_t]

        newval = {}
        for u, v, val, c in zip(us_t.tolist(), vs_t.tolist(), new.tolist(), cls_t.tolist()):
            if c == SENSITIVE:
                newval[u * n + v] = val
        sum_v = 0.0
        max_v = -np.inf
        for u, v in zip(self.val_u.tolist(), self.val_v.tolist()):
            x = newval.get(u * n + v)
            if x is None:
                x = float(self.base_ra[u, v])
            sum_v += x
            if x > max_v:
                max_v = x

        count = self.n_sorted.shape[0] - int(np.searchsorted(self.n_sorted, max_v, side="right"))
        dsum = 0.0
        for val, b, c in zip(new.tolist(), base.tolist(), cls_t.tolist()):
            if c == NONEXISTENT:
                dsum += val - b
                count += (val > max_v) - (b > max_v)
            elif c == TRAIN:
                dsum += val
                count += val > max_v
        added_mask = (cls == NONEXISTENT) & present
        for b in self.base_ra[us[added_mask], vs[added_mask]].tolist():
            dsum -= b
            count -= b > max_v

        n_n = self.n_sorted.shape[0]
        mean_n = (self.sum_n + dsum) / n_n
        mean_v = sum_v / self.val_u.shape[0]
        return alpha * count + (mean_n - mean_v), count, mean_n, mean_v, int(us_t.shape[0])
