"""Small synthetic graph classification tasks (rings vs paths)."""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .trainer import Dataset, GraphSample


def ring_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def ring_path_toy() -> Dataset:
    """Two rings (label 0) and two paths (label 1) with constant features."""
    graphs = [ring_graph(5), ring_graph(6), path_graph(5), path_graph(6)]
    labels = [0, 0, 1, 1]
    return Dataset(
        tuple(GraphSample(g, np.ones((g.num_nodes, 1)), y) for g, y in zip(graphs, labels)),
        2,
        "ring-path-toy",
    )


def ring_path_task(m: int, seed: int, sizes=(5, 12), noise_types: int = 3) -> Dataset:
    """Random rings vs random paths, label 1 for paths.

    Each node carries ``[1, deg / 2]`` followed by a one-hot of a random node
    type that is independent of the label. The class is determined by the
    structure alone, through the two degree-one path endpoints.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(m):
        y = int(rng.integers(2))
        n = int(rng.integers(sizes[0], sizes[1] + 1))
        g = path_graph(n) if y else ring_graph(n)
        deg = np.bincount(g.dst, minlength=n).astype(np.float64)
        types = np.eye(noise_types)[rng.integers(noise_types, size=n)] if noise_types else np.zeros((n, 0))
        x = np.hstack([np.ones((n, 1)), deg[:, None] / 2.0, types])
        samples.append(GraphSample(g, x, y))
    return Dataset(tuple(samples), 2, "ring-path")
