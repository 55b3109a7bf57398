"""Local similarity indices and incremental RA rescoring.

All index values for a pair are computed from the training graph only. The
weighted common-neighbour indices (RA, AA) sum their per-neighbour weights in
ascending neighbour id, both in :func:`score_pair` and in the matrix path, so
equal rational sums compare equal as floats.
"""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from . import kernels
from .graph import Graph, NodePair, Perturbation, pair

TAGS = ("RA", "CN", "JACCARD", "PA", "AA", "LP")


class UnsupportedIndexError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityIndex:
    tag: str
    lp_damping: float = 0.5

    def __post_init__(self):
        tag = self.tag.upper()
        if tag not in TAGS:
            raise ValueError(f"unknown similarity index {self.tag!r}; expected one of {TAGS}")
        object.__setattr__(self, "tag", tag)
        if tag == "LP" and not 0.0 < self.lp_damping <= 1.0:
            raise ValueError("LP damping must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "SimilarityIndex":
        """Parse ``RA``, ``jaccard``, ``LP`` or ``LP(0.3)``."""
        m = re.fullmatch(r"\s*([A-Za-z]+)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse similarity index {text!r}")
        tag, damp = m.groups()
        return cls(tag, float(damp)) if damp else cls(tag)

    def __str__(self):
        return f"LP({self.lp_damping:g})" if self.tag == "LP" else self.tag


RA = SimilarityIndex("RA")
ALL_INDICES = tuple(SimilarityIndex(t) for t in TAGS)


def _aa_weight(d: int) -> float:
    # degree-1 common neighbours contribute 0 (1/ln 1 is undefined)
    return 1.0 / math.log(d) if d > 1 else 0.0


def score_pair(graph: Graph, index: SimilarityIndex, p: NodePair) -> float:
    """Similarity of one node pair, straight from the adjacency sets."""
    u, v = p
    if u == v:
        raise ValueError("a node pair needs two distinct nodes")
    gu, gv = graph.adjacency[u], graph.adjacency[v]
    common = sorted(gu & gv)
    tag = index.tag
    if tag == "RA":
        s = 0.0
        for z in common:
            s += 1.0 / graph.degree(z)
        return s
    if tag == "AA":
        s = 0.0
        for z in common:
            s += _aa_weight(graph.degree(z))
        return s
    if tag == "CN":
        return float(len(common))
    if tag == "JACCARD":
        union = len(gu | gv)
        return len(common) / union if union else 0.0
    if tag == "PA":
        return float(len(gu) * len(gv))
    # LP: walks of length 2 plus damped walks of length 3
    walks3 = sum(len(graph.adjacency[a] & gv) for a in gu)
    return len(common) + index.lp_damping * walks3


def score_matrix(graph: Graph, index: SimilarityIndex) -> np.ndarray:
    """Dense ``n x n`` matrix of index values for every pair (diagonal 0)."""
    adj = graph.dense
    deg = graph.degrees
    tag = index.tag
    if tag == "RA":
        out = kernels.ra_matrix(adj)
    elif tag == "AA":
        w = np.array([_aa_weight(int(d)) for d in deg], dtype=np.float64)
        out = kernels.weighted_cn_matrix(adj, w)
    else:
        a = adj.astype(np.int64)
        cn = a @ a
        if tag == "CN":
            out = cn.astype(np.float64)
        elif tag == "JACCARD":
            union = deg[:, None] + deg[None, :] - cn
            out = np.divide(cn, union, out=np.zeros(cn.shape, dtype=np.float64), where=union > 0)
        elif tag == "PA":
            out = np.outer(deg, deg).astype(np.float64)
        else:
            # integer walk counts are exact, so evaluation order is irrelevant here
            out = cn + index.lp_damping * (cn @ a)
            out = out.astype(np.float64)
    out = np.array(out, dtype=np.float64)
    np.fill_diagonal(out, 0.0)
    return out


def pairs_array(pairs: Iterable[NodePair]) -> np.ndarray:
    """Sorted ``(k, 2)`` int64 array of canonical pairs."""
    arr = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return arr


@dataclass(eq=False)
class ScoreTable:
    """Scores for a set of node pairs under one index.

    ``pairs`` is a sorted ``(k, 2)`` array of canonical pairs; ``scored_set``
    names the pair set it covers (``"N"``, ``"U"``, ``"V"``, ``"Omega"`` or
    any free label), which decides how membership shifts under a perturbation.
    """

    index: SimilarityIndex
    pairs: np.ndarray
    scores: np.ndarray
    scored_set: str = "custom"
    _lookup: dict = field(default=None, repr=False)

    def __len__(self):
        return self.pairs.shape[0]

    def __contains__(self, p):
        return tuple(p) in self.lookup

    def __getitem__(self, p: NodePair) -> float:
        return float(self.scores[self.lookup[tuple(p)]])

    @property
    def lookup(self) -> dict:
        if self._lookup is None:
            self._lookup = {(int(u), int(v)): i for i, (u, v) in enumerate(self.pairs.tolist())}
        return self._lookup

    def as_dict(self) -> dict:
        return {(int(u), int(v)): float(s) for (u, v), s in zip(self.pairs.tolist(), self.scores.tolist())}

    def select(self, pairs: Iterable[NodePair]) -> np.ndarray:
        idx = [self.lookup[tuple(p)] for p in pairs]
        return self.scores[np.array(idx, dtype=np.int64)] if idx else np.empty(0)

    def write_csv(self, dest: TextIO | str | os.PathLike) -> None:
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", newline="", encoding="utf-8") as fh:
                return self.write_csv(fh)
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(["u", "v", "score"])
        for (u, v), s in zip(self.pairs.tolist(), self.scores.tolist()):
            w.writerow([u, v, f"{s:.12g}"])


def table_from_matrix(mat: np.ndarray, index: SimilarityIndex, pairs, scored_set="custom") -> ScoreTable:
    arr = pairs if isinstance(pairs, np.ndarray) else pairs_array(pairs)
    return ScoreTable(index, arr, mat[arr[:, 0], arr[:, 1]].copy() if len(arr) else np.empty(0), scored_set)


def score_all(graph: Graph, index: SimilarityIndex, pairs: Iterable[NodePair], scored_set="custom") -> ScoreTable:
    arr = pairs_array(pairs)
    if len(arr) == 0:
        return ScoreTable(index, arr, np.empty(0), scored_set)
    if arr.min() < 0 or arr.max() >= graph.n_nodes or np.any(arr[:, 0] >= arr[:, 1]):
        raise ValueError("pairs must be canonical (u < v) node pairs of the graph")
    return table_from_matrix(score_matrix(graph, index), index, arr, scored_set)


def affected_pairs(graph: Graph, toggled: NodePair) -> set[NodePair]:
    """Pairs whose RA value can change when ``toggled`` is deleted or inserted.

    Uses the neighbourhoods of both endpoints with the toggled pair counted
    in (the union of the before and after states), which covers both cases.
    """
    i, j = pair(*toggled)
    ui = graph.adjacency[i] | {j}
    uj = graph.adjacency[j] | {i}
    out = {(i, j)}
    for hood in (ui, uj):
        s = sorted(hood)
        for a in range(len(s)):
            for b in range(a + 1, len(s)):
                out.add((s[a], s[b]))
    return out


def affected_bound(graph: Graph, toggled: NodePair) -> float:
    """Upper bound on the affected-set size, with degrees counting the toggled pair."""
    i, j = toggled
    ki = len(graph.adjacency[i] | {j})
    kj = len(graph.adjacency[j] | {i})
    return 0.5 * (ki * ki + kj * kj + ki + kj) + 1


def _pairs_np(pairs) -> np.ndarray:
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def incremental_rescore(table: ScoreTable, graph_before: Graph, pert: Perturbation,
                        state=None) -> ScoreTable:
    """RA table for the perturbed graph, recomputing only affected pairs.

    Membership follows the table's ``scored_set``: for ``"N"`` and ``"U"``
    deleted pairs join and added pairs leave; other sets keep their pairs.
    ``state`` may carry a prebuilt :class:`kernels.RAState` for
    ``graph_before``.
    """
    if table.index.tag != "RA":
        raise UnsupportedIndexError(f"incremental rescoring supports RA only, got {table.index}")
    if not pert.deleted and not pert.added:
        return table
    state = state if state is not None else kernels.RAState(graph_before.dense)
    d, a = _pairs_np(pert.deleted), _pairs_np(pert.added)
    n = graph_before.n_nodes

    pairs = table.pairs
    scores = table.scores.copy()
    if table.scored_set in ("N", "U"):
        codes = pairs[:, 0] * n + pairs[:, 1]
        keep = ~np.isin(codes, a[:, 0] * n + a[:, 1])
        pairs, scores = pairs[keep], scores[keep]
        new_pairs = d[~np.isin(d[:, 0] * n + d[:, 1], codes)] if len(d) else d
        pairs = np.concatenate([pairs, new_pairs])
        scores = np.concatenate([scores, np.full(len(new_pairs), np.nan)])
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs, scores = pairs[order], scores[order]

    aff = state.affected(d, a)
    codes = pairs[:, 0] * n + pairs[:, 1]
    aff_codes = aff[:, 0] * n + aff[:, 1]
    hit = np.flatnonzero(np.isin(codes, aff_codes) | np.isnan(scores))
    if len(hit):
        scores[hit] = state.rescore(d, a, pairs[hit])
    return ScoreTable(table.index, pairs, scores, table.scored_set)
