from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from cgcn.graph import Graph

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
MUTAG_DIR = DATA_DIR / "MUTAG"
PROTEINS_DIR = DATA_DIR / "PROTEINS"

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3) -> Graph:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.uniform() < p]
    return Graph.from_edges(n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
