import json
import math
from collections import Counter

import numpy as np
import pytest

from lpdefense import evolution
from lpdefense.baselines import read_perturbation, write_perturbation
from lpdefense.evolution import (
    Chromosome,
    ChromosomeError,
    EvoParams,
    FitnessContext,
    crossover,
    crossover_at,
    eda_generate_population,
    eda_run,
    fitness,
    ga_run,
    mutate,
    random_chromosome,
    roulette_select,
    selection_weights,
)
from lpdefense.graph import EdgePartition
from lpdefense.similarity import RA, score_all

import oracles
from conftest import random_partition

TOY_TRAIN = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (2, 5), (1, 6)]
TOY_VAL = [(0, 3), (4, 6)]
TOY = EdgePartition(8, frozenset(TOY_TRAIN), frozenset(TOY_VAL))


@pytest.fixture(scope="module")
def ctx():
    return FitnessContext(random_partition(40, 0.3, 11))


def with_fit(chroms, values):
    return [c.with_fitness(v) for c, v in zip(chroms, values)]


def test_params_validation():
    p = EvoParams()
    assert (p.n_iteration, p.n_elite, p.n_crossover, p.n_mutation) == (1000, 10, 50, 50)
    assert (p.pc, p.pm, p.n_estimation, p.n_eda) == (0.7, 0.1, 250, 50)
    assert p.ga_population == 110 and p.eda_population == 110
    with pytest.raises(ValueError):
        EvoParams(alpha=-1)
    with pytest.raises(ValueError):
        EvoParams(pm=1.5)


def test_context_base_table():
    c = FitnessContext(TOY)
    table = score_all(TOY.train_graph, RA, TOY.unknown, "U")
    for (u, v), s in table.as_dict().items():
        assert c.base_ra[u, v] == s


@pytest.mark.parametrize("deleted,added,expected", [
    ((2, 5), (0, 7), 1.84375),
    ((1, 2), (3, 5), 2.921875),
])
def test_toy_fitness_frozen(deleted, added, expected):
    c = FitnessContext(TOY)
    chrom = Chromosome((deleted,), (added,))
    assert fitness(chrom, c, 1.0) == pytest.approx(expected, abs=1e-12)
    assert expected == oracles.fitness(8, TOY_TRAIN, TOY_VAL, [deleted], [added], 1.0)


def test_identity_perturbation_alpha_zero():
    c = FitnessContext(TOY)
    non = sorted(TOY.nonexistent)
    mean_n = math.fsum(c.base_ra[p] for p in non) / len(non)
    mean_v = math.fsum(c.base_ra[p] for p in TOY_VAL) / len(TOY_VAL)
    assert fitness(Chromosome((), ()), c, 0.0) == pytest.approx(mean_n - mean_v, abs=1e-15)


def test_strict_comparison_on_ties():
    # star around 0: RA(1,2) = RA(1,3) = RA(2,3) = 1/3
    part = EdgePartition(4, frozenset({(0, 1), (0, 2), (0, 3)}), frozenset({(1, 2)}))
    c = FitnessContext(part)
    f, count, mean_n, mean_v, _ = c.evaluate(Chromosome((), ()), 1.0)
    assert count == 0
    assert f == mean_n - mean_v == 0.0


def test_invalid_chromosomes_raise():
    c = FitnessContext(TOY)
    bad = [
        Chromosome(((0, 1), (0, 1)), ((0, 7), (1, 7))),
        Chromosome(((0, 3),), ((0, 7),)),
        Chromosome(((0, 1),), ((0, 2),)),
        Chromosome(((0, 1),), ((0, 3),)),
        Chromosome(((0, 1), (0, 2)), ((0, 7),)),
    ]
    for chrom in bad:
        with pytest.raises(ChromosomeError):
            fitness(chrom, c, 1.0)


def test_fitness_matches_oracle_random(ctx):
    rng = np.random.default_rng(3)
    part = ctx.partition
    for _ in range(60):
        chrom = random_chromosome(ctx, int(rng.integers(1, 6)), rng)
        for alpha in (0.0, 0.01, 1.0):
            got = fitness(chrom, ctx, alpha)
            ref = oracles.fitness(part.n_nodes, part.train, part.validation, chrom.deleted, chrom.added, alpha)
            assert abs(got - ref) <= 1e-12


def test_selection_weights_shift_invariant():
    f = np.array([0.3, -2.0, 5.0, 5.0])
    assert np.allclose(selection_weights(f), selection_weights(f + 1234.5), rtol=0, atol=1e-15)
    assert selection_weights([0.0, math.log(3)]).tolist() == pytest.approx([0.25, 0.75])
    big = selection_weights([1e6, 1e6 - 1])
    assert np.isfinite(big).all()


def test_roulette_uniform_and_ratio(ctx, rng):
    pop = with_fit([random_chromosome(ctx, 2, rng) for _ in range(5)], [1.0] * 5)
    picks = roulette_select(pop, 100_000, rng)
    freq = Counter(id(c) for c in picks)
    for c in pop:
        assert abs(freq[id(c)] / 100_000 - 0.2) < 0.02
    pair_pop = with_fit(pop[:2], [0.0, math.log(3)])
    picks = roulette_select(pair_pop, 100_000, rng)
    share = sum(1 for c in picks if c is pair_pop[1]) / 100_000
    assert abs(share - 0.75) < 0.01
    assert roulette_select(pop, 0, rng) == []


def test_crossover_identical_parents(ctx, rng):
    a = random_chromosome(ctx, 4, rng)
    for _ in range(20):
        x, y = crossover(a, a, 1.0, rng)
        assert x == a and y == a


def test_crossover_disjoint_plain_exchange(ctx):
    tr, ne = ctx.train_pairs, ctx.nonexistent_pairs
    a = Chromosome(tr[0:3], ne[0:3])
    b = Chromosome(tr[3:6], ne[3:6])
    x, y = crossover_at(a, b, 1)
    assert x.deleted == (tr[0], tr[4], tr[5]) and y.deleted == (tr[3], tr[1], tr[2])
    assert x.added == (ne[0], ne[4], ne[5]) and y.added == (ne[3], ne[1], ne[2])


def test_crossover_retreat_hand_trace(ctx):
    # A = [x, y, z], B = [p, x, q], cut 1: x would land twice in A, so position 1 stays put
    tr, ne = ctx.train_pairs, ctx.nonexistent_pairs
    x, y, z, p, q = tr[:5]
    a = Chromosome((x, y, z), ne[0:3])
    b = Chromosome((p, x, q), ne[3:6])
    ca, cb = crossover_at(a, b, 1)
    assert ca.deleted == (x, y, q)
    assert cb.deleted == (p, x, z)
    assert ca.added == (ne[0], ne[4], ne[5])


def test_crossover_retreat_cascade(ctx):
    # exchanging position 2 is blocked; keeping A[2]=w then blocks position 1 (B[1] = w)
    tr, ne = ctx.train_pairs, ctx.nonexistent_pairs
    x, w, s, t, u = tr[:5]
    a = Chromosome((x, s, w), ne[0:3])
    b = Chromosome((t, w, x), ne[3:6])
    ca, cb = crossover_at(a, b, 1)
    for c in (ca, cb):
        assert len(set(c.deleted)) == 3
    assert ca.deleted == a.deleted and cb.deleted == b.deleted


def test_crossover_offspring_valid(ctx, rng):
    done = 0
    while done < 300:
        m = int(rng.integers(1, 7))
        a, b = random_chromosome(ctx, m, rng), random_chromosome(ctx, m, rng)
        # share some of a's genes with b at shuffled positions
        mixed = list(a.deleted[: m // 2]) + [g for g in b.deleted if g not in a.deleted][: m - m // 2]
        if len(mixed) < m:
            continue
        b = Chromosome(tuple(mixed[i] for i in rng.permutation(m)), b.added)
        ctx.check(b)
        x, y = crossover(a, b, 1.0, rng)
        ctx.check(x)
        ctx.check(y)
        assert Counter(x.deleted + y.deleted) == Counter(a.deleted + b.deleted)
        assert Counter(x.added + y.added) == Counter(a.added + b.added)
        done += 1


def test_crossover_probability_zero_copies(ctx, rng):
    a, b = random_chromosome(ctx, 5, rng), random_chromosome(ctx, 5, rng)
    assert crossover(a, b, 0.0, rng) == (a, b)


def test_mutate_pm_zero(ctx, rng):
    a = random_chromosome(ctx, 6, rng)
    assert mutate(a, 0.0, ctx, rng) is a


def test_mutate_pigeonhole_keeps_gene_set(rng):
    part = EdgePartition(6, frozenset({(0, 1), (2, 3)}), frozenset({(4, 5)}))
    c = FitnessContext(part)
    chrom = Chromosome(((0, 1), (2, 3)), ((0, 2), (1, 3)))
    for _ in range(200):
        out = mutate(chrom, 1.0, c, rng)
        assert set(out.deleted) == {(0, 1), (2, 3)}
        c.check(out)


def test_mutate_binomial_rate(ctx, rng):
    chrom = random_chromosome(ctx, 10, rng)
    trials = 100_000
    changed_d = changed_a = 0
    for _ in range(trials):
        out = mutate(chrom, 0.1, ctx, rng)
        changed_d += sum(g != h for g, h in zip(chrom.deleted, out.deleted))
        changed_a += sum(g != h for g, h in zip(chrom.added, out.added))
    assert abs(changed_d / trials - 1.0) < 0.02
    assert abs(changed_a / trials - 1.0) < 0.02


def test_mutate_budget_error(ctx, rng, monkeypatch):
    monkeypatch.setattr(evolution, "MAX_REDRAWS", 0)
    with pytest.raises(ChromosomeError):
        mutate(random_chromosome(ctx, 3, rng), 1.0, ctx, rng)


def test_eda_identical_selection(ctx, rng):
    a = random_chromosome(ctx, 5, rng)
    for child in eda_generate_population([a] * 7, 20, rng):
        assert set(child.deleted) == set(a.deleted) and set(child.added) == set(a.added)


def test_eda_frequencies(ctx, rng):
    e1, e2 = ctx.train_pairs[:2]
    n1, n2 = ctx.nonexistent_pairs[:2]
    sel = [Chromosome((e1,), (n1,))] * 3 + [Chromosome((e2,), (n2,))]
    out = eda_generate_population(sel, 100_000, rng)
    share = sum(1 for c in out if c.deleted == (e1,)) / len(out)
    assert abs(share - 0.75) < 0.01


def test_eda_children_valid(ctx, rng):
    sel = [random_chromosome(ctx, 6, rng) for _ in range(30)]
    for child in eda_generate_population(sel, 200, rng):
        ctx.check(child)


def test_eda_small_support(ctx, rng):
    a = random_chromosome(ctx, 3, rng)
    short = [Chromosome(a.deleted[:2], a.added[:2]), a]
    with pytest.raises(ChromosomeError):
        evolution._sample_section([g.deleted[:1] for g in short], 3, rng, None)
    sup, p = evolution._sample_section([g.deleted[:1] for g in short], 3, rng, ctx.train_pairs)
    assert len(sup) == 3 and p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        eda_generate_population([], 3, rng)


@pytest.mark.parametrize("search", [ga_run, eda_run])
def test_runs_monotone_valid_and_deterministic(search, lesmis_folds):
    c = FitnessContext(lesmis_folds[1])
    params = EvoParams(alpha=0.01, m=5, n_iteration=25, seed=4)
    seen = []

    def check(gen, pop):
        assert len(pop) == params.ga_population
        for chrom in pop:
            c.check(chrom)
        seen.append(gen)

    res = search(c, params, callback=check)
    assert seen == list(range(25))
    assert all(b >= a for a, b in zip(res.history, res.history[1:]))
    assert res.best.fitness == max(res.history)
    assert res.best.fitness == pytest.approx(fitness(res.best, c, params.alpha), abs=0)
    again = search(FitnessContext(lesmis_folds[1]), params)
    assert again.history == res.history and again.best == res.best


def test_convergence_patience_stops_early():
    c = FitnessContext(TOY)
    params = EvoParams(alpha=1.0, m=1, n_iteration=500, convergence_patience=5, seed=1)
    res = eda_run(c, params)
    assert res.generations < 500
    assert len(set(res.history[-6:])) == 1


def test_run_record_roundtrip(tmp_path, lesmis_folds):
    part = lesmis_folds[2]
    c = FitnessContext(part)
    res = ga_run(c, EvoParams(m=3, n_iteration=5, seed=2))
    res.write_json(tmp_path / "run.json", part.labels)
    rec = json.loads((tmp_path / "run.json").read_text())
    assert set(rec) >= {"params", "history", "chromosome", "wall_clock"}
    assert rec["history"] == res.history
    assert len(rec["chromosome"]["DEL"]) == 3
    write_perturbation(res.best.to_perturbation(), tmp_path / "p.txt", part.labels)
    assert read_perturbation(tmp_path / "p.txt", part.labels) == res.best.to_perturbation()
    res.best.to_perturbation().validate(part)
