"""Genetic and estimation-of-distribution search over link perturbations.

A chromosome holds ``m`` deleted training edges and ``m`` inserted
non-existent pairs. Its fitness rewards non-existent pairs that outscore
every sensitive link under RA, plus the gap between the mean RA of the
non-existent pairs and the mean RA of the sensitive links, both measured on
the perturbed training graph. Fitness is evaluated incrementally: only the
pairs around the toggled links are rescored.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .graph import EdgePartition, NodePair, Perturbation
from .similarity import pairs_array

log = logging.getLogger(__name__)

MAX_REDRAWS = 1000
DEBUG = bool(os.environ.get("LPDEFENSE_DEBUG"))


class ChromosomeError(ValueError):
    pass


@dataclass(frozen=True)
class Chromosome:
    deleted: tuple[NodePair, ...]
    added: tuple[NodePair, ...]
    fitness: float | None = field(default=None, compare=False)

    @property
    def m(self) -> int:
        return len(self.deleted)

    def with_fitness(self, value: float) -> "Chromosome":
        return replace(self, fitness=value)

    def to_perturbation(self) -> Perturbation:
        return Perturbation(frozenset(self.deleted), frozenset(self.added))

    def gene_sets(self) -> tuple[frozenset, frozenset]:
        return frozenset(self.deleted), frozenset(self.added)


@dataclass(frozen=True)
class EvoParams:
    alpha: float = 0.01
    m: int = 1
    n_iteration: int = 1000
    n_elite: int = 10
    n_crossover: int = 50
    n_mutation: int = 50
    pc: float = 0.7
    pm: float = 0.1
    n_estimation: int = 250
    n_eda: int = 50
    seed: int = 0
    convergence_patience: int = 100

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not (0.0 <= self.pc <= 1.0 and 0.0 <= self.pm <= 1.0):
            raise ValueError("pc and pm must lie in [0, 1]")
        if self.n_elite < 0 or self.n_crossover < 0 or self.n_mutation < 0 or self.n_eda < 0:
            raise ValueError("population counts must be non-negative")

    @property
    def ga_population(self) -> int:
        return self.n_elite + self.n_crossover + self.n_mutation

    @property
    def eda_population(self) -> int:
        return self.n_elite + self.n_eda + self.n_mutation


# Per-network alpha used in the reference experiments.
NETWORK_ALPHA = {"mexican": 0.01, "dolphin": 0.01, "lesmis": 0.01, "throne": 0.01, "bomb": 1.0, "jazz": 0.0}


class FitnessContext:
    """Everything fitness needs for one fold, built once from the unperturbed training graph."""

    def __init__(self, partition: EdgePartition, backend=None):
        impl = backend if backend is not None else kernels
        self.partition = partition
        n = partition.n_nodes
        self.n = n
        adj = partition.train_graph.dense
        self.train_pairs = partition.train_sorted
        self.nonexistent_pairs = partition.nonexistent_sorted
        self.train_set = partition.train
        self.nonexistent_set = partition.nonexistent
        self.base_ra = impl.ra_matrix(adj)
        cls = np.full((n, n), kernels.NONEXISTENT, dtype=np.uint8)
        for arr, code in ((pairs_array(partition.train), kernels.TRAIN),
                          (pairs_array(partition.validation), kernels.SENSITIVE)):
            if len(arr):
                cls[arr[:, 0], arr[:, 1]] = code
                cls[arr[:, 1], arr[:, 0]] = code
        np.fill_diagonal(cls, kernels.DIAGONAL)
        self.cls = cls
        val = pairs_array(partition.validation)
        non = pairs_array(partition.nonexistent)
        if len(val) == 0 or len(non) == 0:
            raise ValueError("fitness needs non-empty sensitive and non-existent sets")
        n_vals = self.base_ra[non[:, 0], non[:, 1]]
        v_vals = self.base_ra[val[:, 0], val[:, 1]]
        self.state = impl.RAState(adj)
        self.state.set_fitness_context(self.base_ra, cls, val, np.sort(n_vals),
                                       math.fsum(n_vals.tolist()), math.fsum(v_vals.tolist()))
        self.full_rescore_pairs = len(non) + len(val)
        self.evaluations = 0
        self.rescored_pairs = 0

    def check(self, chrom: Chromosome) -> None:
        d, a = chrom.deleted, chrom.added
        if len(d) != len(a):
            raise ChromosomeError("deleted and added sections differ in length")
        if len(set(d)) != len(d) or len(set(a)) != len(a):
            raise ChromosomeError("duplicate gene in chromosome")
        if not all(p in self.train_set for p in d):
            raise ChromosomeError("deleted gene outside the training edges")
        if not all(p in self.nonexistent_set for p in a):
            raise ChromosomeError("added gene outside the non-existent pairs")

    def evaluate(self, chrom: Chromosome, alpha: float) -> tuple[float, int, float, float, int]:
        """Kernel call without validation: ``(fitness, count, mean_N, mean_V, n_rescored)``."""
        out = self.state.fitness(np.array(chrom.deleted, dtype=np.int64).reshape(-1, 2),
                                 np.array(chrom.added, dtype=np.int64).reshape(-1, 2), alpha)
        self.evaluations += 1
        self.rescored_pairs += out[4]
        return out


def fitness(chrom: Chromosome, ctx: FitnessContext, alpha: float) -> float:
    """Validated fitness of one chromosome on its fold."""
    ctx.check(chrom)
    return float(ctx.evaluate(chrom, alpha)[0])


def _evaluate_all(pop: list[Chromosome], ctx: FitnessContext, alpha: float) -> list[Chromosome]:
    out = []
    for c in pop:
        if c.fitness is None:
            if DEBUG:
                ctx.check(c)
            c = c.with_fitness(float(ctx.evaluate(c, alpha)[0]))
        out.append(c)
    return out


def random_chromosome(ctx: FitnessContext, m: int, rng: np.random.Generator) -> Chromosome:
    tr, ne = ctx.train_pairs, ctx.nonexistent_pairs
    if m > len(tr) or m > len(ne):
        raise ChromosomeError(f"m={m} exceeds the candidate pools ({len(tr)}, {len(ne)})")
    d = tuple(tr[i] for i in rng.choice(len(tr), m, replace=False))
    a = tuple(ne[i] for i in rng.choice(len(ne), m, replace=False))
    return Chromosome(d, a)


def selection_weights(fitness_values) -> np.ndarray:
    """Roulette probabilities proportional to ``exp(fitness)`` (max-shifted)."""
    f = np.asarray(fitness_values, dtype=np.float64)
    w = np.exp(f - f.max())
    return w / w.sum()


def roulette_select(population: Sequence[Chromosome], count: int, rng: np.random.Generator) -> list[Chromosome]:
    if count <= 0:
        return []
    if not population:
        raise ValueError("cannot select from an empty population")
    p = selection_weights([c.fitness for c in population])
    idx = rng.choice(len(population), size=count, replace=True, p=p)
    return [population[i] for i in idx]


def _cross_section(a: tuple, b: tuple, cut: int) -> tuple[tuple, tuple]:
    """Exchange tails from ``cut``; positions whose exchange would duplicate a gene stay put."""
    m = len(a)
    retreat: set[int] = set()
    head_a, head_b = set(a[:cut]), set(b[:cut])
    for t in range(cut, m):
        if b[t] != a[t] and (b[t] in head_a or a[t] in head_b):
            retreat.add(t)
    changed = True
    while changed:
        changed = False
        kept_a = {a[s] for s in retreat}
        kept_b = {b[s] for s in retreat}
        for t in range(cut, m):
            if t in retreat or b[t] == a[t]:
                continue
            if b[t] in kept_a or a[t] in kept_b:
                retreat.add(t)
                changed = True
    ca, cb = list(a), list(b)
    for t in range(cut, m):
        if t not in retreat:
            ca[t], cb[t] = b[t], a[t]
    return tuple(ca), tuple(cb)


def crossover_at(parent_a: Chromosome, parent_b: Chromosome, cut: int) -> tuple[Chromosome, Chromosome]:
    """Single-point crossover at ``cut``, applied to both sections."""
    da, db = _cross_section(parent_a.deleted, parent_b.deleted, cut)
    aa, ab = _cross_section(parent_a.added, parent_b.added, cut)
    return Chromosome(da, aa), Chromosome(db, ab)


def crossover(parent_a: Chromosome, parent_b: Chromosome, pc: float,
              rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    if parent_a.m != parent_b.m:
        raise ChromosomeError("parents differ in length")
    m = parent_a.m
    if m < 2 or rng.random() >= pc:
        return parent_a, parent_b
    cut = int(rng.integers(1, m))
    return crossover_at(parent_a, parent_b, cut)


def _mutate_section(genes: tuple, pool: Sequence, pm: float, rng: np.random.Generator) -> tuple:
    hits = np.flatnonzero(rng.random(len(genes)) < pm)
    if hits.size == 0:
        return genes
    out = list(genes)
    for t in hits.tolist():
        others = set(out)
        others.discard(out[t])
        for _ in range(MAX_REDRAWS):
            g = pool[int(rng.integers(len(pool)))]
            if g not in others:
                out[t] = g
                break
        else:
            raise ChromosomeError(f"no collision-free replacement in {MAX_REDRAWS} draws")
    return tuple(out)


def mutate(chrom: Chromosome, pm: float, ctx: FitnessContext, rng: np.random.Generator) -> Chromosome:
    """Replace each gene with probability ``pm`` by a fresh draw from its pool."""
    d = _mutate_section(chrom.deleted, ctx.train_pairs, pm, rng)
    a = _mutate_section(chrom.added, ctx.nonexistent_pairs, pm, rng)
    if d is chrom.deleted and a is chrom.added:
        return chrom
    return Chromosome(d, a)


def _sample_section(selected_genes: list[tuple], m: int, rng: np.random.Generator,
                    pool: Sequence | None) -> list[tuple]:
    counts = Counter(g for genes in selected_genes for g in genes)
    support = sorted(counts)
    weights = np.array([counts[g] for g in support], dtype=np.float64)
    if len(support) < m:
        if pool is None:
            raise ChromosomeError(f"gene distribution has {len(support)} values, fewer than m={m}")
        log.info("padding EDA support of %d genes with uniform candidates", len(support))
        extra = [g for g in pool if g not in counts]
        pick = rng.choice(len(extra), m - len(support), replace=False)
        support += [extra[i] for i in pick]
        weights = np.concatenate([weights, np.full(len(pick), weights.sum() / max(len(counts), 1) if counts else 1.0)])
    return support, weights / weights.sum()


def eda_generate_population(selected: Sequence[Chromosome], n_eda: int, rng: np.random.Generator,
                            ctx: FitnessContext | None = None) -> list[Chromosome]:
    """Sample ``n_eda`` chromosomes from the gene frequencies of ``selected``.

    Genes in each section are drawn without repetition inside a chromosome,
    which is the same as redrawing on a duplicate.
    """
    if not selected:
        raise ValueError("EDA needs at least one selected chromosome")
    m = selected[0].m
    sup_d, p_d = _sample_section([c.deleted for c in selected], m, rng, ctx.train_pairs if ctx else None)
    sup_a, p_a = _sample_section([c.added for c in selected], m, rng, ctx.nonexistent_pairs if ctx else None)
    out = []
    for _ in range(n_eda):
        d = tuple(sup_d[i] for i in rng.choice(len(sup_d), m, replace=False, p=p_d))
        a = tuple(sup_a[i] for i in rng.choice(len(sup_a), m, replace=False, p=p_a))
        out.append(Chromosome(d, a))
    return out


@dataclass
class EvoResult:
    best: Chromosome
    history: list[float]
    params: EvoParams
    method: str
    generations: int
    wall_clock: float
    evaluations: int = 0
    rescored_pairs: int = 0

    def to_record(self, labels=None) -> dict:
        name = (lambda x: labels[x]) if labels else (lambda x: x)
        return {
            "method": self.method,
            "params": asdict(self.params),
            "history": self.history,
            "generations": self.generations,
            "best_fitness": self.best.fitness,
            "chromosome": {
                "DEL": [[name(u), name(v)] for u, v in self.best.deleted],
                "ADD": [[name(u), name(v)] for u, v in self.best.added],
            },
            "wall_clock": self.wall_clock,
        }

    def write_json(self, path, labels=None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_record(labels), fh, indent=2)


def _rank(pop: list[Chromosome]) -> list[Chromosome]:
    # stable sort: ties keep insertion order
    return sorted(pop, key=lambda c: -c.fitness)


def _evolve(ctx: FitnessContext, params: EvoParams, method: str, callback=None) -> EvoResult:
    rng = np.random.default_rng(params.seed)
    size = params.ga_population if method == "ga" else params.eda_population
    if size < 2:
        raise ValueError("population size must be at least 2")
    t0 = time.perf_counter()
    evals0, pairs0 = ctx.evaluations, ctx.rescored_pairs
    pop = [random_chromosome(ctx, params.m, rng) for _ in range(size)]
    history: list[float] = []
    best: Chromosome | None = None
    stale = 0
    gen = 0
    for gen in range(params.n_iteration):
        pop = _rank(_evaluate_all(pop, ctx, params.alpha))
        if best is None or pop[0].fitness > best.fitness:
            best = pop[0]
            stale = 0
        else:
            stale += 1
        history.append(best.fitness)
        if callback is not None:
            callback(gen, pop)
        if stale >= params.convergence_patience:
            break
        elites = pop[: params.n_elite]
        if method == "ga":
            chosen = roulette_select(pop, params.n_crossover, rng)
            offspring: list[Chromosome] = []
            for k in range(0, len(chosen) - 1, 2):
                offspring.extend(crossover(chosen[k], chosen[k + 1], params.pc, rng))
            if len(chosen) % 2:
                offspring.append(chosen[-1])
        else:
            est = roulette_select(pop, params.n_estimation, rng)
            offspring = eda_generate_population(est, params.n_eda, rng, ctx)
        mutants = [mutate(c, params.pm, ctx, rng) for c in roulette_select(pop, params.n_mutation, rng)]
        pop = elites + offspring + mutants
    else:
        pop = _rank(_evaluate_all(pop, ctx, params.alpha))
        if pop[0].fitness > best.fitness:
            best = pop[0]
            history.append(best.fitness)
    return EvoResult(best, history, params, method, gen + 1, time.perf_counter() - t0,
                     ctx.evaluations - evals0, ctx.rescored_pairs - pairs0)


def ga_run(ctx: FitnessContext, params: EvoParams, callback=None) -> EvoResult:
    """Elitist GA: roulette-selected single-point crossover plus mutation."""
    return _evolve(ctx, params, "ga", callback)


def eda_run(ctx: FitnessContext, params: EvoParams, callback=None) -> EvoResult:
    """Elitist EDA: resample from gene frequencies of roulette-selected individuals."""
    return _evolve(ctx, params, "eda", callback)
