import sys

import numpy as np
import pytest

from rnslab.graph import build_graph


def make_graph(edges, n, labels=None, split=None, dim=3, seed=0, num_classes=None):
    rng = np.random.default_rng(seed)
    labels = np.zeros(n, dtype=int) if labels is None else np.asarray(labels)
    split = np.zeros(n, dtype=int) if split is None else split
    return build_graph(edges, rng.normal(size=(n, dim)), labels, split, num_nodes=n, num_classes=num_classes)


def random_graph(n, p, seed, classes=3, dim=4, split_probs=(0.6, 0.2, 0.2)):
    """Erdos-Renyi style test graph with random labels, features and split."""
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    edges = np.stack([iu[0][keep], iu[1][keep]], axis=1)
    labels = rng.integers(0, classes, n)
    split = rng.choice(3, size=n, p=split_probs)
    split[0] = 0
    return build_graph(edges, rng.normal(size=(n, dim)), labels, split, num_nodes=n, num_classes=classes)


@pytest.fixture
def triangle():
    return make_graph([(0, 1), (1, 2), (0, 2)], 3)


@pytest.fixture
def path5():
    return make_graph([(i, i + 1) for i in range(4)], 5)


@pytest.fixture
def small_graph():
    return random_graph(20, 0.2, seed=7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
