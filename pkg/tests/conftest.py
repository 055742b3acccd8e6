import os

import numpy as np
import pytest

from mpstrat.graph import Graph, WeightedSubgraph

DATA = os.path.join(os.path.dirname(__file__), "data")

CHAIN = Graph.from_edges(3, [(0, 1), (1, 2)])  # a -> b -> c


def weighted(n, triples):
    """WeightedSubgraph over exactly the listed (src, dst, weight) edges."""
    G = Graph.from_edges(n, [(s, d) for s, d, _ in triples])
    idx = G.edge_index
    order = sorted(range(len(triples)), key=lambda i: idx[triples[i][:2]])
    return WeightedSubgraph(G, np.array([idx[triples[i][:2]] for i in order]),
                            np.array([float(triples[i][2]) for i in order]))


@pytest.fixture
def chain():
    return CHAIN


@pytest.fixture
def data_dir():
    return DATA


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
