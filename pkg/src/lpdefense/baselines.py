"""Random rewiring, degree-preserving swapping and the greedy RA heuristic."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import kernels
from .graph import EdgePartition, NodePair, Perturbation, pair

log = logging.getLogger(__name__)

MAX_SWAP_ATTEMPTS = 1000
MAX_PROPORTION = 0.25


class InsufficientCandidatesError(ValueError):
    pass


class SwapBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class BaselineParams:
    m: int
    seed: int = 0
    repeats: int = 1
    enforce_cap: bool = True

    def check(self, partition: EdgePartition, *, even: bool = False) -> None:
        if self.m < 0:
            raise ValueError("m must be non-negative")
        cap = math.floor(MAX_PROPORTION * len(partition.train))
        if self.enforce_cap and self.m > cap:
            raise ValueError(f"m={self.m} exceeds the sparsity cap {cap} (25% of training edges)")
        if even and self.m % 2:
            raise ValueError("link swapping needs an even m")


def budget(partition: EdgePartition, proportion: float) -> int:
    """Number of deleted (and inserted) links for a proportion of the training set."""
    return math.floor(proportion * len(partition.train) + 1e-9)


def rlr(partition: EdgePartition, params: BaselineParams) -> Perturbation:
    """Delete a uniform m-subset of training edges and insert a uniform m-subset of N."""
    params.check(partition)
    train, non = partition.train_sorted, partition.nonexistent_sorted
    m = params.m
    if m > len(train) or m > len(non):
        raise InsufficientCandidatesError(f"cannot rewire {m} links ({len(train)} edges, {len(non)} non-edges)")
    rng = np.random.default_rng(params.seed)
    deleted = frozenset(train[i] for i in rng.choice(len(train), m, replace=False))
    added = frozenset(non[i] for i in rng.choice(len(non), m, replace=False))
    return Perturbation(deleted, added)


def rls(partition: EdgePartition, params: BaselineParams) -> Perturbation:
    """Perform m/2 degree-preserving swaps on the training graph.

    A swap takes edges (i, u), (j, v) and rewires them to (i, v), (j, u). The
    attempt is discarded and redrawn when a new edge already exists, is a
    sensitive link, was deleted earlier, or the four endpoints are not distinct.
    """
    params.check(partition, even=True)
    rng = np.random.default_rng(params.seed)
    current = set(partition.train)
    available = list(partition.train_sorted)
    non = partition.nonexistent
    deleted: set[NodePair] = set()
    added: set[NodePair] = set()
    for _ in range(params.m // 2):
        for _attempt in range(MAX_SWAP_ATTEMPTS):
            if len(available) < 2:
                raise InsufficientCandidatesError("fewer than two swappable edges left")
            a, b = rng.choice(len(available), 2, replace=False)
            i, u = available[a]
            j, v = available[b]
            if rng.random() < 0.5:
                j, v = v, j
            if len({i, u, j, v}) < 4:
                continue
            e1, e2 = pair(i, v), pair(j, u)
            if any(e in current or e not in non or e in added for e in (e1, e2)):
                continue
            for old in (available[a], available[b]):
                current.discard(old)
                deleted.add(old)
            for idx in sorted((a, b), reverse=True):
                available.pop(idx)
            current.update((e1, e2))
            added.update((e1, e2))
            break
        else:
            raise SwapBudgetExceeded(f"no valid swap found in {MAX_SWAP_ATTEMPTS} attempts")
    return Perturbation(frozenset(deleted), frozenset(added))


class HPState:
    """Mutable training graph that the heuristic edits while it traverses pairs."""

    def __init__(self, partition: EdgePartition):
        self.adj = [set(a) for a in partition.train_graph.adjacency]
        self.train0 = partition.train
        self.validation = partition.validation
        self.nonexistent0 = partition.nonexistent
        self.deleted: list[NodePair] = []
        self.added: list[NodePair] = []
        self._deleted: set[NodePair] = set()
        self._added: set[NodePair] = set()

    def deg(self, x: int) -> int:
        return len(self.adj[x])

    def is_edge(self, p: NodePair) -> bool:
        return p[1] in self.adj[p[0]]

    def can_delete(self, p: NodePair) -> bool:
        return p in self.train0 and p not in self._deleted

    def can_add(self, p: NodePair) -> bool:
        return p in self.nonexistent0 and p not in self._added

    def delete(self, p: NodePair) -> NodePair:
        u, v = p
        self.adj[u].discard(v)
        self.adj[v].discard(u)
        self.deleted.append(p)
        self._deleted.add(p)
        return p

    def insert(self, p: NodePair) -> NodePair:
        u, v = p
        self.adj[u].add(v)
        self.adj[v].add(u)
        self.added.append(p)
        self._added.add(p)
        return p

    def by_degree(self, nodes) -> list[int]:
        """Nodes in ascending degree, ties by ascending id."""
        return sorted(nodes, key=lambda x: (self.deg(x), x))


def hp_delete_link(p: NodePair, state: HPState) -> NodePair | None:
    i, j = p
    if p in state.train0:
        return state.delete(p) if state.can_delete(p) else None
    if p in state.validation:
        common = state.adj[i] & state.adj[j]
        if not common:
            return None
        k = state.by_degree(common)[0]
        l = max((i, j), key=lambda x: (state.deg(x), -x))
        e = pair(k, l)
        if state.is_edge(e) and state.can_delete(e):
            return state.delete(e)
    return None


def hp_add_link(p: NodePair, state: HPState) -> NodePair | None:
    i, j = p
    if p in state.validation:
        common = state.by_degree(state.adj[i] & state.adj[j])
        if len(common) < 2:
            return None
        e = pair(common[0], common[1])
        if not state.is_edge(e) and e not in state.validation and state.can_add(e):
            return state.insert(e)
        return None
    if p in state.nonexistent0 and not state.is_edge(p):
        gi, gj = state.adj[i], state.adj[j]
        diff = (gi | gj) - (gi & gj)
        if not diff:
            return None
        k = state.by_degree(diff)[0]
        l = j if k in gi else i
        e = pair(k, l)
        if e not in state.validation and state.can_add(e):
            return state.insert(e)
    return None


def ra_ranked_pairs(partition: EdgePartition) -> list[NodePair]:
    """All node pairs by descending RA on the training graph, ties by ascending pair."""
    ra = kernels.ra_matrix(partition.train_graph.dense)
    iu, iv = np.triu_indices(partition.n_nodes, k=1)
    order = np.lexsort((iv, iu, -ra[iu, iv]))
    return list(zip(iu[order].tolist(), iv[order].tolist()))


def hp(partition: EdgePartition, m: int, seed: int = 0, trace: list | None = None,
       pad: bool = True) -> Perturbation:
    """Greedy single pass over RA-ranked pairs.

    Training pairs are deleted; sensitive pairs first lose a link to their
    weakest common neighbour, and (once the deletion budget is spent) gain a
    link between their two weakest common neighbours; non-existent pairs gain
    a new common neighbour. The ranking is computed once, on the unperturbed
    training graph. A short result is padded with random rewiring unless
    ``pad`` is false. ``trace`` collects ``(trigger, kind, edit)`` tuples.
    """
    BaselineParams(m).check(partition)
    st = HPState(partition)
    for p in ra_ranked_pairs(partition):
        if p in st.train0 or p in st.validation:
            if len(st.deleted) < m:
                e = hp_delete_link(p, st)
                if e is not None and trace is not None:
                    trace.append((p, "delete", e))
                continue
        if p in st.validation or p in st.nonexistent0:
            if len(st.added) < m:
                e = hp_add_link(p, st)
                if e is not None and trace is not None:
                    trace.append((p, "add", e))
        if len(st.deleted) == m and len(st.added) == m:
            break
    if pad and (len(st.deleted) < m or len(st.added) < m):
        log.info("HP padded %d deletions and %d insertions at random", m - len(st.deleted), m - len(st.added))
        rng = np.random.default_rng(seed)
        spare_del = [e for e in partition.train_sorted if st.can_delete(e)]
        for idx in rng.permutation(len(spare_del))[: m - len(st.deleted)]:
            st.delete(spare_del[idx])
        spare_add = [e for e in partition.nonexistent_sorted if st.can_add(e)]
        for idx in rng.permutation(len(spare_add))[: m - len(st.added)]:
            st.insert(spare_add[idx])
    return Perturbation(frozenset(st.deleted), frozenset(st.added))


def write_perturbation(pert: Perturbation, dest: TextIO | str | os.PathLike, labels=None) -> None:
    """Write ``DEL u v`` lines followed by ``ADD u v`` lines (node labels if given)."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            return write_perturbation(pert, fh, labels)
    name = (lambda x: labels[x]) if labels else str
    for u, v in sorted(pert.deleted):
        dest.write(f"DEL {name(u)} {name(v)}\n")
    for u, v in sorted(pert.added):
        dest.write(f"ADD {name(u)} {name(v)}\n")


def read_perturbation(source: TextIO | str | os.PathLike, labels=None) -> Perturbation:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return read_perturbation(fh, labels)
    ids = {lab: i for i, lab in enumerate(labels)} if labels else None
    out: dict[str, set] = {"DEL": set(), "ADD": set()}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in out:
            raise ValueError(f"line {lineno}: expected 'DEL u v' or 'ADD u v'")
        try:
            u, v = (ids[t] for t in parts[1:]) if ids else (int(t) for t in parts[1:])
        except KeyError as exc:
            raise ValueError(f"line {lineno}: unknown node {exc.args[0]!r}") from None
        out[parts[0]].add(pair(u, v))
    return Perturbation(frozenset(out["DEL"]), frozenset(out["ADD"]))
