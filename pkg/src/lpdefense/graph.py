"""Undirected simple graphs, edge-set bookkeeping and fold splitting.

Node pairs are plain ``(u, v)`` tuples with ``u < v``. Every set of pairs
handled by the package (training edges, sensitive edges, non-existent pairs)
uses that canonical form, so set algebra is ordinary Python set algebra.
"""

from __future__ import annotations

import io
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, TextIO

import numpy as np

log = logging.getLogger(__name__)

NodePair = tuple[int, int]


class EdgeListError(ValueError):
    """Raised for unreadable edge-list input."""


class PerturbationError(ValueError):
    """Raised when a perturbation violates its constraints against a partition."""


def pair(u: int, v: int) -> NodePair:
    """Canonical unordered pair."""
    if u == v:
        raise ValueError(f"self-pair ({u}, {v}) is not a node pair")
    return (u, v) if u < v else (v, u)


def all_pairs(n: int) -> Iterator[NodePair]:
    for u in range(n):
        for v in range(u + 1, n):
            yield (u, v)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph on dense ids ``0..n_nodes-1``.

    ``labels`` keeps the original node tokens for reporting.
    """

    n_nodes: int
    adjacency: tuple[frozenset[int], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.adjacency) != self.n_nodes:
            raise ValueError("adjacency length does not match n_nodes")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n_nodes)))

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[NodePair], labels=()) -> "Graph":
        adj: list[set[int]] = [set() for _ in range(n_nodes)]
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            adj[u].add(v)
            adj[v].add(u)
        return cls(n_nodes, tuple(frozenset(s) for s in adj), tuple(labels))

    @cached_property
    def edges(self) -> frozenset[NodePair]:
        return frozenset((u, v) for u in range(self.n_nodes) for v in self.adjacency[u] if u < v)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple[int, ...]:
        """Neighbors of ``u`` in ascending id order."""
        return tuple(sorted(self.adjacency[u]))

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    @cached_property
    def dense(self) -> np.ndarray:
        """0/1 adjacency matrix (uint8, C-contiguous)."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.uint8)
        if self.edges:
            e = np.array(sorted(self.edges), dtype=np.int64)
            a[e[:, 0], e[:, 1]] = 1
            a[e[:, 1], e[:, 0]] = 1
        return a

    def with_edges(self, edges: Iterable[NodePair]) -> "Graph":
        """Same node set and labels, different edge set."""
        return Graph.from_edges(self.n_nodes, edges, self.labels)


def parse_edge_list(lines: Iterable[str]) -> tuple[list[str], list[NodePair], int]:
    """Parse edge-list lines into ``(labels, canonical edges, n_dropped)``.

    Labels are assigned dense ids in order of first appearance. Duplicate
    edges (in either orientation) and self-loops are dropped and counted.
    """
    ids: dict[str, int] = {}
    labels: list[str] = []
    seen: set[NodePair] = set()
    edges: list[NodePair] = []
    dropped = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListError(f"line {lineno}: expected 2 node tokens, got {len(tokens)}")
        ends = []
        for tok in tokens:
            if tok not in ids:
                ids[tok] = len(labels)
                labels.append(tok)
            ends.append(ids[tok])
        u, v = ends
        if u == v:
            dropped += 1
            continue
        p = (u, v) if u < v else (v, u)
        if p in seen:
            dropped += 1
            continue
        seen.add(p)
        edges.append(p)
    if not edges:
        raise EdgeListError("edge list contains no edges")
    return labels, edges, dropped


def load_edge_list(source: str | os.PathLike | TextIO) -> Graph:
    """Read a whitespace-separated edge list (``#``/``%`` comments allowed)."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            labels, edges, dropped = parse_edge_list(fh)
    else:
        labels, edges, dropped = parse_edge_list(source)
    if dropped:
        log.warning("dropped %d duplicate or self-loop edge(s)", dropped)
    return Graph.from_edges(len(labels), edges, labels)


def write_edge_list(graph: Graph, dest: TextIO) -> None:
    for u, v in sorted(graph.edges):
        dest.write(f"{graph.labels[u]} {graph.labels[v]}\n")


def dumps_edge_list(graph: Graph) -> str:
    buf = io.StringIO()
    write_edge_list(graph, buf)
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class EdgePartition:
    """Split of the edge set into training edges and sensitive (validation) edges.

    The derived sets follow the usual link-prediction bookkeeping: ``omega``
    is every unordered node pair, ``nonexistent = omega - E`` and
    ``unknown = omega - train = nonexistent | validation``.
    """

    n_nodes: int
    train: frozenset[NodePair]
    validation: frozenset[NodePair]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.train & self.validation:
            raise ValueError("training and validation edges overlap")

    @cached_property
    def edges(self) -> frozenset[NodePair]:
        return self.train | self.validation

    @property
    def omega_size(self) -> int:
        return self.n_nodes * (self.n_nodes - 1) // 2

    @cached_property
    def nonexistent(self) -> frozenset[NodePair]:
        e = self.edges
        return frozenset(p for p in all_pairs(self.n_nodes) if p not in e)

    @cached_property
    def unknown(self) -> frozenset[NodePair]:
        return self.nonexistent | self.validation

    @cached_property
    def train_graph(self) -> Graph:
        return Graph.from_edges(self.n_nodes, self.train, self.labels)

    @cached_property
    def train_sorted(self) -> tuple[NodePair, ...]:
        return tuple(sorted(self.train))

    @cached_property
    def nonexistent_sorted(self) -> tuple[NodePair, ...]:
        return tuple(sorted(self.nonexistent))


@dataclass(frozen=True)
class Perturbation:
    """Deleted training edges paired with inserted non-existent pairs."""

    deleted: frozenset[NodePair] = field(default_factory=frozenset)
    added: frozenset[NodePair] = field(default_factory=frozenset)

    @property
    def m(self) -> int:
        return len(self.deleted)

    def inverse(self) -> "Perturbation":
        return Perturbation(self.added, self.deleted)

    def validate(self, partition: EdgePartition) -> None:
        if len(self.deleted) != len(self.added):
            raise PerturbationError(
                f"unbalanced perturbation: {len(self.deleted)} deleted vs {len(self.added)} added"
            )
        if self.deleted & self.added:
            raise PerturbationError("a pair is both deleted and added")
        if not self.deleted <= partition.train:
            raise PerturbationError("deleted pairs must be training edges")
        bad = [p for p in self.added if p in partition.edges or p[0] == p[1]]
        if bad:
            raise PerturbationError(f"added pairs must be non-existent pairs, got {sorted(bad)[:3]}")


class PerturbedSets(NamedTuple):
    train: frozenset[NodePair]
    unknown: frozenset[NodePair]
    nonexistent: frozenset[NodePair]


def apply_perturbation(partition: EdgePartition, pert: Perturbation) -> PerturbedSets:
    """Training, unknown and non-existent sets after applying ``pert``."""
    pert.validate(partition)
    return PerturbedSets(
        train=(partition.train - pert.deleted) | pert.added,
        unknown=(partition.unknown | pert.deleted) - pert.added,
        nonexistent=(partition.nonexistent | pert.deleted) - pert.added,
    )


def kfold_split(graph: Graph, k: int, seed: int) -> list[EdgePartition]:
    """Shuffle the edges and cut them into ``k`` disjoint validation folds.

    Fold sizes differ by at most one; the first ``|E| mod k`` folds get the
    extra edge.
    """
    edges = sorted(graph.edges)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > len(edges):
        raise ValueError(f"cannot split {len(edges)} edges into {k} folds")
    order = np.random.default_rng(seed).permutation(len(edges))
    shuffled = [edges[i] for i in order]
    base, extra = divmod(len(edges), k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append(frozenset(shuffled[start:start + size]))
        start += size
    everything = frozenset(edges)
    return [EdgePartition(graph.n_nodes, everything - fold, fold, graph.labels) for fold in folds]


@dataclass(frozen=True)
class TopoStats:
    n_nodes: int
    n_edges: int
    avg_degree: float
    clustering: float
    avg_distance: float

    def as_row(self) -> dict:
        return {
            "nodes": self.n_nodes,
            "edges": self.n_edges,
            "avg_degree": round(self.avg_degree, 3),
            "clustering": round(self.clustering, 3),
            "avg_distance": round(self.avg_distance, 3),
        }


def _local_clustering(graph: Graph, u: int) -> float:
    nbrs = graph.adjacency[u]
    k = len(nbrs)
    if k < 2:
        return 0.0
    links = sum(len(graph.adjacency[a] & nbrs) for a in nbrs) // 2
    return 2.0 * links / (k * (k - 1))


def topo_stats(graph: Graph) -> TopoStats:
    """Size, mean degree, mean local clustering and mean shortest-path length.

    The distance average runs over connected ordered pairs only.
    """
    n = graph.n_nodes
    if n == 0:
        raise ValueError("empty graph")
    clustering = math.fsum(_local_clustering(graph, u) for u in range(n)) / n
    total = 0
    reached = 0
    for s in range(n):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in graph.adjacency[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        total += sum(dist.values())
        reached += len(dist) - 1
    avg_distance = total / reached if reached else 0.0
    return TopoStats(n, graph.edge_count, 2.0 * graph.edge_count / n, clustering, avg_distance)
