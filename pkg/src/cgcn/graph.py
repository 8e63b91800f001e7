"""Graphs, graph shift operators and k-hop signal aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

SHIFT_KINDS = (
    "adjacency",
    "symmetric-normalized-adjacency",
    "laplacian",
    "normalized-laplacian",
)
DEFAULT_SHIFT_KIND = "symmetric-normalized-adjacency"


@dataclass(frozen=True)
class Graph:
    """Weighted graph on nodes ``0..num_nodes-1``.

    Edges are stored as parallel arrays. For undirected graphs both
    orientations of every edge are present (self-loops once), which is what
    :meth:`from_edges` produces.
    """

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    undirected: bool = True

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: Iterable[Sequence[float]],
        undirected: bool = True,
    ) -> "Graph":
        """Build a graph from ``(src, dst)`` or ``(src, dst, weight)`` tuples.

        Duplicate edges keep the first weight seen; for undirected graphs the
        reverse orientation is added with the same weight.
        """
        if num_nodes < 0:
            raise ValueError("num_nodes must be non-negative")
        seen: dict[tuple[int, int], float] = {}
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if not (0 <= i < num_nodes and 0 <= j < num_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {num_nodes} nodes")
            key = (min(i, j), max(i, j)) if undirected else (i, j)
            if key not in seen:
                seen[key] = w
        src, dst, wts = [], [], []
        for (i, j), w in sorted(seen.items()):
            src.append(i)
            dst.append(j)
            wts.append(w)
            if undirected and i != j:
                src.append(j)
                dst.append(i)
                wts.append(w)
        return cls(
            num_nodes,
            np.asarray(src, dtype=np.int64),
            np.asarray(dst, dtype=np.int64),
            np.asarray(wts, dtype=np.float64),
            undirected,
        )

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (or directed arcs if not undirected)."""
        if not self.undirected:
            return len(self.src)
        loops = int(np.sum(self.src == self.dst))
        return (len(self.src) - loops) // 2 + loops

    def adjacency(self) -> sp.csr_matrix:
        # entry (i, j) holds the weight of edge j -> i, so (SX)_i sums over N_i
        n = self.num_nodes
        return sp.csr_matrix((self.weight, (self.dst, self.src)), shape=(n, n))

    def permuted(self, perm: np.ndarray) -> "Graph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        return Graph(self.num_nodes, perm[self.src], perm[self.dst], self.weight.copy(), self.undirected)


@dataclass(frozen=True)
class ShiftOperator:
    kind: str
    matrix: sp.csr_matrix

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]


def _inv_sqrt_degree(deg: np.ndarray, allow_isolated: bool) -> np.ndarray:
    if np.any(deg < 0):
        raise ValueError("negative weighted degree; normalized shift undefined")
    zero = deg == 0
    if np.any(zero) and not allow_isolated:
        raise ValueError(f"isolated node(s) {np.flatnonzero(zero).tolist()} under a normalized shift")
    out = np.zeros_like(deg)
    out[~zero] = 1.0 / np.sqrt(deg[~zero])
    return out


def build_shift_operator(
    graph: Graph,
    kind: str = DEFAULT_SHIFT_KIND,
    allow_isolated: bool = True,
) -> ShiftOperator:
    """Build the graph shift operator of the requested kind.

    Parameters
    ----------
    graph : Graph
    kind : str
        One of ``SHIFT_KINDS``.
    allow_isolated : bool
        Under normalized kinds, give degree-zero nodes an all-zero row and
        column (their ``D^{-1/2}`` entry is taken as 0). If False such nodes
        raise ``ValueError``.
    """
    if kind not in SHIFT_KINDS:
        raise ValueError(f"unknown shift kind {kind!r}; expected one of {SHIFT_KINDS}")
    a = graph.adjacency()
    n = graph.num_nodes
    if kind == "adjacency":
        m = a
    else:
        deg = np.asarray(a.sum(axis=1)).ravel()
        if kind == "laplacian":
            m = sp.diags(deg) - a
        else:
            d = sp.diags(_inv_sqrt_degree(deg, allow_isolated))
            norm_adj = d @ a @ d
            if kind == "symmetric-normalized-adjacency":
                m = norm_adj
            else:
                # isolated nodes get a zero row, not an identity row
                m = sp.diags((deg > 0).astype(np.float64)) - norm_adj
    m = sp.csr_matrix(m, shape=(n, n), dtype=np.float64)
    m.eliminate_zeros()
    m.sort_indices()
    return ShiftOperator(kind, m)


def shift_signal(s: ShiftOperator, x: np.ndarray, k: int) -> np.ndarray:
    """Return ``S^k X`` via ``k`` sparse products."""
    x = np.asarray(x, dtype=np.float64)
    if k < 0:
        raise ValueError("hop count must be non-negative")
    if x.ndim != 2 or x.shape[0] != s.num_nodes:
        raise ValueError(f"signal shape {x.shape} does not match {s.num_nodes} nodes")
    out = x
    for _ in range(k):
        out = s.matrix @ out
    return out


def shift_stack(s: ShiftOperator, x: np.ndarray, hops: int) -> np.ndarray:
    """Stack ``[X, SX, ..., S^K X]`` into an array of shape ``(K+1, n, F)``.

    ``stack[:, i, :]`` is the ``(K+1) x F`` matrix whose row ``k`` is the
    signal aggregated at node ``i`` from ``k`` hops away.
    """
    if hops < 0:
        raise ValueError("hop count must be non-negative")
    cur = shift_signal(s, x, 0)
    out = [cur]
    for _ in range(hops):
        cur = s.matrix @ cur
        out.append(cur)
    return np.stack(out)


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Scale nonzero rows to unit l2 norm; zero rows are left as they are."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return x / safe


class GraphBatch:
    """Disjoint union of several graphs, nodes flattened graph by graph.

    ``offsets[j]:offsets[j+1]`` are the flattened rows of graph ``j``.
    """

    def __init__(self, shifts: Sequence[ShiftOperator]):
        if not shifts:
            raise ValueError("empty batch")
        self.kind = shifts[0].kind
        sizes = np.array([s.num_nodes for s in shifts], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.graph_index = np.repeat(np.arange(len(shifts)), sizes)
        self.shift = ShiftOperator(self.kind, sp.block_diag([s.matrix for s in shifts], format="csr"))

    @property
    def num_graphs(self) -> int:
        return len(self.offsets) - 1

    @property
    def num_nodes(self) -> int:
        return int(self.offsets[-1])

    def sum_pool(self, x: np.ndarray) -> np.ndarray:
        """Per-graph sums of node rows, shape ``(num_graphs, F)``."""
        out = np.zeros((self.num_graphs, x.shape[1]))
        np.add.at(out, self.graph_index, x)
        return out

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]
