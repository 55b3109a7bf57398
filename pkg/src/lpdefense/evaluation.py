"""Precision and AUC of a link-prediction attack, and the fold protocol."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import EdgePartition, Graph, NodePair, Perturbation, apply_perturbation
from .similarity import RA, ScoreTable, SimilarityIndex, pairs_array, score_matrix

TIE_BREAK = "score desc, then pair (u, v) asc"


@dataclass(frozen=True)
class EvalResult:
    precision: float
    auc: float
    method: str
    index: str
    proportion: float
    fold: int
    seed: int
    repeat: int = 0
    network: str = ""
    tie_break: str = TIE_BREAK

    def __post_init__(self):
        for name in ("precision", "auc"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name}={x} outside [0, 1]")

    def as_dict(self) -> dict:
        return asdict(self)


def ranked_order(pairs: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Indices sorting pairs by descending score, ties by ascending (u, v)."""
    return np.lexsort((pairs[:, 1], pairs[:, 0], -scores))


def precision_from_arrays(pairs: np.ndarray, scores: np.ndarray, is_positive: np.ndarray, k: int,
                          n_positive: int | None = None) -> float:
    if k > len(scores):
        raise ValueError(f"k={k} exceeds the {len(scores)} scored pairs")
    if k <= 0:
        raise ValueError("k must be positive")
    top = ranked_order(pairs, scores)[:k]
    hits = int(np.count_nonzero(is_positive[top]))
    n_positive = int(np.count_nonzero(is_positive)) if n_positive is None else n_positive
    # with k = |E^V| both denominators coincide; otherwise report hits / k
    return hits / (n_positive if k == n_positive else k)


def precision_at_k(table: ScoreTable, validation: Iterable[NodePair], k: int | None = None) -> float:
    """Fraction of the top-``k`` scored pairs that are sensitive links (default ``k = |E^V|``)."""
    validation = set(validation)
    lookup = table.lookup
    missing = [p for p in validation if p not in lookup]
    if missing:
        raise ValueError(f"{len(missing)} validation pairs are not in the scored set")
    k = len(validation) if k is None else k
    is_pos = np.zeros(len(table), dtype=bool)
    is_pos[[lookup[p] for p in validation]] = True
    return precision_from_arrays(table.pairs, table.scores, is_pos, k, len(validation))


def auc_from_scores(positive: np.ndarray, negative: np.ndarray) -> float:
    """Exact ``(n_> + 0.5 n_=) / (|pos| |neg|)`` over all positive/negative comparisons."""
    positive = np.asarray(positive, dtype=np.float64)
    negative = np.asarray(negative, dtype=np.float64)
    if positive.size == 0 or negative.size == 0:
        raise ValueError("AUC needs non-empty positive and negative sets")
    neg = np.sort(negative)
    below = np.searchsorted(neg, positive, side="left")
    upto = np.searchsorted(neg, positive, side="right")
    greater = int(below.sum())
    equal = int((upto - below).sum())
    return (greater + 0.5 * equal) / (positive.size * neg.size)


def auc(table: ScoreTable, validation: Iterable[NodePair], nonexistent: Iterable[NodePair]) -> float:
    validation = list(validation)
    nonexistent = list(nonexistent)
    if not validation or not nonexistent:
        raise ValueError("AUC needs non-empty validation and non-existent sets")
    if set(validation) & set(nonexistent):
        raise ValueError("validation and non-existent sets overlap")
    return auc_from_scores(table.select(validation), table.select(nonexistent))


class AttackScorer:
    """Scores the unknown pairs of one fold after a perturbation.

    Precomputes the fold's pair arrays once; each call builds the perturbed
    training graph, scores it with the attack index and returns
    ``(precision, auc)``.
    """

    def __init__(self, partition: EdgePartition):
        self.partition = partition
        n = partition.n_nodes
        self.n = n
        self.train_adj = partition.train_graph.dense
        self.val = pairs_array(partition.validation)
        non = pairs_array(partition.nonexistent)
        self.non_codes = non[:, 0] * n + non[:, 1]

    def perturbed_adj(self, pert: Perturbation) -> np.ndarray:
        adj = self.train_adj.copy()
        if pert.deleted:
            d = pairs_array(pert.deleted)
            adj[d[:, 0], d[:, 1]] = 0
            adj[d[:, 1], d[:, 0]] = 0
        if pert.added:
            a = pairs_array(pert.added)
            adj[a[:, 0], a[:, 1]] = 1
            adj[a[:, 1], a[:, 0]] = 1
        return adj

    def nonexistent_after(self, pert: Perturbation) -> np.ndarray:
        n = self.n
        codes = self.non_codes
        if pert.added:
            a = pairs_array(pert.added)
            codes = codes[~np.isin(codes, a[:, 0] * n + a[:, 1])]
        if pert.deleted:
            d = pairs_array(pert.deleted)
            codes = np.union1d(codes, d[:, 0] * n + d[:, 1])
        return np.stack([codes // n, codes % n], axis=1)

    def __call__(self, pert: Perturbation, attack: SimilarityIndex = RA,
                 matrix: np.ndarray | None = None) -> tuple[float, float]:
        if matrix is None:
            g = Graph.from_edges(self.n, apply_perturbation(self.partition, pert).train)
            matrix = score_matrix(g, attack)
        non = self.nonexistent_after(pert)
        val = self.val
        pairs = np.concatenate([non, val])
        scores = matrix[pairs[:, 0], pairs[:, 1]]
        is_pos = np.zeros(len(pairs), dtype=bool)
        is_pos[len(non):] = True
        prec = precision_from_arrays(pairs, scores, is_pos, len(val), len(val))
        a = auc_from_scores(scores[len(non):], scores[:len(non)])
        return prec, a


Defense = Callable[[EdgePartition, int], Perturbation]


def noop_defense(partition: EdgePartition, seed: int) -> Perturbation:
    return Perturbation()


def run_seed(seed: int, fold: int, repeat: int) -> int:
    """Deterministic per-(fold, repeat) seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, fold, repeat]).generate_state(1)[0])


@dataclass
class DefenseReport:
    rows: list[EvalResult]
    mean: EvalResult
    perturbations: list[tuple[int, int, Perturbation]] = field(default_factory=list, repr=False)


def mean_result(rows: Sequence[EvalResult], seed: int | None = None) -> EvalResult:
    first = rows[0]
    return EvalResult(
        precision=math.fsum(r.precision for r in rows) / len(rows),
        auc=math.fsum(r.auc for r in rows) / len(rows),
        method=first.method,
        index=first.index,
        proportion=first.proportion,
        fold=-1,
        seed=first.seed if seed is None else seed,
        repeat=-1,
        network=first.network,
    )


def evaluate_defense(graph: Graph, folds: Sequence[EdgePartition], defense: Defense,
                     attack: SimilarityIndex | Sequence[SimilarityIndex] = RA, *, method: str = "defense",
                     proportion: float = 0.0, seed: int = 0, repeats: int = 1,
                     network: str = "", keep_perturbations: bool = False,
                     fold_ids: Sequence[int] | None = None) -> DefenseReport | dict:
    """Run ``defense`` on every fold and score the perturbed training graph.

    Row seeds are the derived per-run seeds; the mean row carries ``seed``.
    With a single attack index returns one :class:`DefenseReport`; with a
    sequence, a dict of reports keyed by index name (the same perturbation
    is scored under every index). ``fold_ids`` renumbers the folds when
    only a subset of a split is passed in.
    """
    attacks = [attack] if isinstance(attack, SimilarityIndex) else list(attack)
    rows: dict[str, list[EvalResult]] = {str(a): [] for a in attacks}
    perts = []
    ids = list(range(len(folds))) if fold_ids is None else list(fold_ids)
    for f, part in zip(ids, folds):
        scorer = AttackScorer(part)
        for r in range(repeats):
            s = run_seed(seed, f, r)
            pert = defense(part, s)
            pert.validate(part)
            if keep_perturbations:
                perts.append((f, r, pert))
            g = Graph.from_edges(part.n_nodes, apply_perturbation(part, pert).train)
            for a in attacks:
                prec, au = scorer(pert, a, score_matrix(g, a))
                rows[str(a)].append(EvalResult(prec, au, method, str(a), proportion, f, s, r, network))
    reports = {k: DefenseReport(v, mean_result(v, seed), perts) for k, v in rows.items()}
    if isinstance(attack, SimilarityIndex):
        return reports[str(attack)]
    return reports
