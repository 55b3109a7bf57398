import random

import numpy as np
import pytest
from hypothesis import strategies as st

from lpdefense import datasets, kernels
from lpdefense.graph import EdgePartition, Graph, kfold_split


def random_graph(n, p, seed):
    rng = random.Random(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def random_partition(n, p, seed, frac=0.2):
    g = random_graph(n, p, seed)
    edges = sorted(g.edges)
    rng = random.Random(seed + 1)
    rng.shuffle(edges)
    k = max(1, int(frac * len(edges)))
    return EdgePartition(n, frozenset(edges[k:]), frozenset(edges[:k]))


@st.composite
def graphs(draw, min_nodes=2, max_nodes=12):
    n = draw(st.integers(min_nodes, max_nodes))
    all_p = [(u, v) for u in range(n) for v in range(u + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(all_p), max_size=len(all_p)))
    return Graph.from_edges(n, [p for p, keep in zip(all_p, mask) if keep])


@pytest.fixture(scope="session")
def lesmis():
    return datasets.load("lesmis")[1]


@pytest.fixture(scope="session")
def lesmis_folds(lesmis):
    return kfold_split(lesmis, 10, 0)


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
