import io

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdefense.graph import (
    EdgeListError,
    EdgePartition,
    Graph,
    Perturbation,
    PerturbationError,
    apply_perturbation,
    dumps_edge_list,
    kfold_split,
    load_edge_list,
    pair,
    parse_edge_list,
    topo_stats,
)

from conftest import graphs, random_graph, random_partition


def test_pair_is_canonical():
    assert pair(5, 2) == (2, 5)
    assert pair(2, 5) == (2, 5)
    with pytest.raises(ValueError):
        pair(3, 3)


def test_parse_drops_duplicates_and_self_loops(caplog):
    text = "# comment\n% other\na b\nb a\nc c\nb c\n\n"
    labels, edges, dropped = parse_edge_list(io.StringIO(text))
    assert labels == ["a", "b", "c"]
    assert edges == [(0, 1), (1, 2)]
    assert dropped == 2
    g = load_edge_list(io.StringIO(text))
    assert g.edge_count == 2
    assert "dropped 2" in caplog.text


def test_parse_rejects_bad_lines():
    with pytest.raises(EdgeListError, match="line 2"):
        parse_edge_list(["a b", "a b c"])
    with pytest.raises(EdgeListError):
        parse_edge_list(["# nothing"])


def test_single_edge_graph():
    g = load_edge_list(io.StringIO("x y\n"))
    s = topo_stats(g)
    assert (s.n_nodes, s.n_edges, s.avg_degree) == (2, 1, 1.0)
    assert s.avg_distance == 1.0


def test_roundtrip_edge_list():
    g = random_graph(15, 0.3, 1)
    h = load_edge_list(io.StringIO(dumps_edge_list(g)))
    relabel = {int(lab): i for i, lab in enumerate(h.labels)}
    assert {pair(relabel[u], relabel[v]) for u, v in g.edges} == set(h.edges)


@settings(max_examples=60, deadline=None)
@given(graphs(min_nodes=1, max_nodes=14))
def test_topo_stats_match_networkx(g):
    ref = nx.Graph()
    ref.add_nodes_from(range(g.n_nodes))
    ref.add_edges_from(g.edges)
    s = topo_stats(g)
    assert s.n_edges == ref.number_of_edges()
    assert s.clustering == pytest.approx(nx.average_clustering(ref), abs=1e-12)
    total = reached = 0
    for src, dist in nx.all_pairs_shortest_path_length(ref):
        total += sum(dist.values())
        reached += len(dist) - 1
    assert s.avg_distance == pytest.approx(total / reached if reached else 0.0)


def test_partition_sets():
    part = random_partition(10, 0.4, 3)
    omega = {(u, v) for u in range(10) for v in range(u + 1, 10)}
    assert part.nonexistent == omega - part.train - part.validation
    assert part.unknown == omega - part.train
    assert part.omega_size == len(omega)
    with pytest.raises(ValueError):
        EdgePartition(3, frozenset({(0, 1)}), frozenset({(0, 1)}))


def test_apply_perturbation_sets():
    part = random_partition(12, 0.35, 4)
    d = sorted(part.train)[:3]
    a = sorted(part.nonexistent)[:3]
    pert = Perturbation(frozenset(d), frozenset(a))
    out = apply_perturbation(part, pert)
    assert out.train == (part.train - set(d)) | set(a)
    assert out.nonexistent == (part.nonexistent | set(d)) - set(a)
    assert out.unknown == (part.unknown | set(d)) - set(a)
    # validation stays hidden and disjoint from the released graph
    assert not out.train & part.validation
    assert out.unknown == out.nonexistent | part.validation
    back = apply_perturbation(EdgePartition(12, out.train, part.validation), pert.inverse())
    assert back.train == part.train


@pytest.mark.parametrize("bad", [
    lambda p: Perturbation(frozenset(sorted(p.train)[:2]), frozenset(sorted(p.nonexistent)[:1])),
    lambda p: Perturbation(frozenset(sorted(p.validation)[:1]), frozenset(sorted(p.nonexistent)[:1])),
    lambda p: Perturbation(frozenset(sorted(p.train)[:1]), frozenset(sorted(p.validation)[:1])),
    lambda p: Perturbation(frozenset(sorted(p.train)[:1]), frozenset(sorted(p.train)[1:2])),
])
def test_invalid_perturbations(bad):
    part = random_partition(12, 0.35, 5)
    with pytest.raises(PerturbationError):
        apply_perturbation(part, bad(part))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_kfold_split_properties(n_edges, k, seed):
    g = Graph.from_edges(n_edges + 1, [(0, i) for i in range(1, n_edges + 1)])
    if k > n_edges:
        with pytest.raises(ValueError):
            kfold_split(g, k, seed)
        return
    folds = kfold_split(g, k, seed)
    sizes = [len(f.validation) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)
    union = frozenset().union(*(f.validation for f in folds))
    assert union == g.edges and sum(sizes) == len(g.edges)
    for f in folds:
        assert f.train | f.validation == g.edges
    assert [f.validation for f in kfold_split(g, k, seed)] == [f.validation for f in folds]


def test_kfold_split_errors():
    g = random_graph(6, 0.5, 0)
    with pytest.raises(ValueError):
        kfold_split(g, 1, 0)
