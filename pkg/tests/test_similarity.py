import io
import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdefense.graph import Graph, Perturbation
from lpdefense.similarity import (
    ALL_INDICES,
    RA,
    SimilarityIndex,
    UnsupportedIndexError,
    affected_pairs,
    incremental_rescore,
    score_all,
    score_matrix,
    score_pair,
    affected_bound,
)

import oracles
from conftest import graphs, random_graph

# triangle 0-1-2 with a pendant 3 on node 2
TOY = Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)])


@pytest.mark.parametrize("tag,p,expected", [
    ("RA", (0, 3), 1 / 3),
    ("RA", (0, 2), 1 / 2),
    ("CN", (0, 1), 1.0),
    ("JACCARD", (0, 1), 1 / 3),
    ("PA", (0, 1), 4.0),
    ("AA", (0, 3), 1 / math.log(3)),
    ("LP", (0, 3), 1.5),
    ("JACCARD", (1, 3), 1 / 2),
])
def test_toy_values(tag, p, expected):
    idx = SimilarityIndex(tag)
    assert score_pair(TOY, idx, p) == pytest.approx(expected, abs=1e-15)
    assert score_matrix(TOY, idx)[p] == pytest.approx(expected, abs=1e-15)


def test_isolated_pair_scores_zero():
    g = Graph.from_edges(4, [(0, 1)])
    for idx in ALL_INDICES:
        assert score_pair(g, idx, (2, 3)) == 0.0
        assert score_matrix(g, idx)[2, 3] == 0.0


def test_index_parsing():
    assert SimilarityIndex.parse("jaccard").tag == "JACCARD"
    assert SimilarityIndex.parse("LP(0.3)").lp_damping == 0.3
    assert str(SimilarityIndex.parse("LP")) == "LP(0.5)"
    with pytest.raises(ValueError):
        SimilarityIndex("katz")
    with pytest.raises(ValueError):
        SimilarityIndex("LP", 0.0)


@settings(max_examples=50, deadline=None)
@given(graphs(max_nodes=11))
def test_matrix_matches_pairwise_and_networkx(g):
    ref = nx.Graph()
    ref.add_nodes_from(range(g.n_nodes))
    ref.add_edges_from(g.edges)
    adj = {u: set(g.adjacency[u]) for u in range(g.n_nodes)}
    pairs = list(itertools.combinations(range(g.n_nodes), 2))
    mats = {str(i): score_matrix(g, i) for i in ALL_INDICES}
    for (u, v) in pairs:
        for idx in ALL_INDICES:
            # same summation order: bitwise equality, not just closeness
            assert mats[str(idx)][u, v] == score_pair(g, idx, (u, v))
            assert mats[str(idx)][u, v] == mats[str(idx)][v, u]
        assert mats["RA"][u, v] == oracles.ra(adj, u, v)
        assert mats["LP(0.5)"][u, v] == oracles.walks(adj, u, v, 2) + 0.5 * oracles.walks(adj, u, v, 3)
    if pairs:
        for (u, v, s) in nx.resource_allocation_index(ref, pairs):
            assert mats["RA"][u, v] == pytest.approx(s, abs=1e-12)
        for (u, v, s) in nx.jaccard_coefficient(ref, pairs):
            assert mats["JACCARD"][u, v] == pytest.approx(s, abs=1e-12)
        for (u, v, s) in nx.adamic_adar_index(ref, pairs):
            assert mats["AA"][u, v] == pytest.approx(s, abs=1e-12)
        for (u, v, s) in nx.preferential_attachment(ref, pairs):
            assert mats["PA"][u, v] == s
        for u, v in pairs:
            assert mats["CN"][u, v] == len(list(nx.common_neighbors(ref, u, v)))


def test_score_all_and_csv():
    tab = score_all(TOY, RA, [(2, 3), (0, 3), (1, 3)], "N")
    assert tab.pairs.tolist() == [[0, 3], [1, 3], [2, 3]]
    assert tab[(0, 3)] == pytest.approx(1 / 3)
    assert (1, 3) in tab and (0, 1) not in tab
    buf = io.StringIO()
    tab.write_csv(buf)
    assert buf.getvalue().splitlines() == ["u,v,score", "0,3,0.333333333333", "1,3,0.333333333333", "2,3,0"]
    with pytest.raises(ValueError):
        score_all(TOY, RA, [(0, 9)])


def test_affected_pairs_bound_example():
    g = Graph.from_edges(5, [(0, 1), (0, 2), (3, 4)])
    aff = affected_pairs(g, (0, 3))
    assert aff == {(0, 3), (1, 2), (1, 3), (2, 3), (0, 4)}
    assert len(aff) <= affected_bound(g, (0, 3))


@settings(max_examples=80, deadline=None)
@given(graphs(max_nodes=9), st.data())
def test_changed_pairs_within_affected(g, data):
    i, j = data.draw(st.sampled_from(list(itertools.combinations(range(g.n_nodes), 2))))
    changed = oracles.changed_pairs(g.n_nodes, g.edges, (i, j))
    aff = affected_pairs(g, (i, j))
    assert changed <= aff
    assert len(aff) <= affected_bound(g, (i, j))


def _perturb(g, rng, m):
    edges = sorted(g.edges)
    non = [p for p in itertools.combinations(range(g.n_nodes), 2) if p not in g.edges]
    m = min(m, len(edges), len(non))
    d = [edges[k] for k in rng.choice(len(edges), m, replace=False)]
    a = [non[k] for k in rng.choice(len(non), m, replace=False)]
    return Perturbation(frozenset(d), frozenset(a))


@pytest.mark.parametrize("scored_set", ["N", "U", "Omega"])
def test_incremental_rescore_matches_full(scored_set, backend):
    rng = np.random.default_rng(7)
    for trial in range(40):
        g = random_graph(14, 0.3, trial)
        pert = _perturb(g, rng, 3)
        omega = list(itertools.combinations(range(14), 2))
        base_pairs = {"N": [p for p in omega if p not in g.edges], "U": [p for p in omega if p not in g.edges],
                      "Omega": omega}[scored_set]
        table = score_all(g, RA, base_pairs, scored_set)
        out = incremental_rescore(table, g, pert, backend.RAState(g.dense))
        after = g.with_edges((g.edges - pert.deleted) | pert.added)
        if scored_set == "Omega":
            expect_pairs = omega
        else:
            expect_pairs = sorted((set(base_pairs) | pert.deleted) - pert.added)
        full = score_all(after, RA, expect_pairs, scored_set)
        assert out.pairs.tolist() == full.pairs.tolist()
        assert np.array_equal(out.scores, full.scores)


def test_incremental_rescore_rejects_other_indices():
    tab = score_all(TOY, SimilarityIndex("CN"), [(0, 3)])
    with pytest.raises(UnsupportedIndexError):
        incremental_rescore(tab, TOY, Perturbation(frozenset({(2, 3)}), frozenset({(1, 3)})))
