"""CGCN layers and the stacked graph-classification model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .factorization import FactorizedKernel, map_to_features
from .graph import (
    DEFAULT_SHIFT_KIND,
    Graph,
    GraphBatch,
    ShiftOperator,
    build_shift_operator,
    normalize_rows,
    shift_stack,
)
from .optim import nuclear_norm


@dataclass(frozen=True)
class Readout:
    """Linear map from pooled features to class scores: ``h @ matrix + bias``."""

    matrix: np.ndarray
    bias: np.ndarray

    def __call__(self, pooled: np.ndarray) -> np.ndarray:
        return pooled @ self.matrix + self.bias

    @classmethod
    def identity(cls, num_classes: int) -> "Readout":
        return cls(np.eye(num_classes), np.zeros(num_classes))


@dataclass(frozen=True)
class CgcnLayer:
    """One convexified graph convolution.

    ``filters[k]`` has shape ``(kernels[k].width, F_out)``; the nuclear
    budget applies to their vertical concatenation.
    """

    hops: int
    kernels: tuple[FactorizedKernel, ...]
    filters: tuple[np.ndarray, ...]
    budget: float

    def __post_init__(self):
        if len(self.kernels) != self.hops + 1 or len(self.filters) != self.hops + 1:
            raise ValueError("need one kernel and one filter matrix per hop")
        for fk, a in zip(self.kernels, self.filters):
            if a.shape[0] != fk.width:
                raise ValueError(f"filter rows {a.shape[0]} != factor width {fk.width}")

    @property
    def input_dim(self) -> int:
        return self.kernels[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.filters[0].shape[1]

    @property
    def widths(self) -> list[int]:
        return [fk.width for fk in self.kernels]

    def stacked_filters(self) -> np.ndarray:
        return np.vstack(self.filters)

    def nuclear_norm(self) -> float:
        return nuclear_norm(self.stacked_filters())


def split_filters(stacked: np.ndarray, widths: Sequence[int]) -> tuple[np.ndarray, ...]:
    cuts = np.cumsum(widths)[:-1]
    return tuple(np.array(a) for a in np.split(stacked, cuts, axis=0))


@dataclass(frozen=True)
class CgcnModel:
    """Stacked CGCN layers followed by sum pooling and a linear readout.

    ``hidden_readouts`` are the frozen maps used to supervise hidden layers
    during layer-wise training; they play no part in :func:`model_forward`.
    """

    layers: tuple[CgcnLayer, ...]
    readout: Readout
    shift_kind: str = DEFAULT_SHIFT_KIND
    hidden_readouts: tuple[Readout, ...] = ()
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if nxt.input_dim != prev.output_dim:
                raise ValueError("layer input dim must equal previous output dim")

    @property
    def num_classes(self) -> int:
        return self.readout.matrix.shape[1]


def layer_kernel_features(layer: CgcnLayer, s: ShiftOperator, x: np.ndarray) -> list[np.ndarray]:
    """Per-hop kernel features, each of shape ``(n, P_k)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.input_dim:
        raise ValueError(f"signal shape {x.shape} incompatible with layer input dim {layer.input_dim}")
    stack = shift_stack(s, normalize_rows(x), layer.hops)
    return [map_to_features(fk, normalize_rows(z)) for fk, z in zip(layer.kernels, stack)]


def layer_forward(layer: CgcnLayer, features: Sequence[np.ndarray]) -> np.ndarray:
    """``sum_k features[k] @ filters[k]``."""
    if len(features) != len(layer.filters):
        raise ValueError("need one feature signal per hop")
    out = None
    for z, a in zip(features, layer.filters):
        if z.shape[1] != a.shape[0]:
            raise ValueError(f"feature width {z.shape[1]} != filter rows {a.shape[0]}")
        term = z @ a
        out = term if out is None else out + term
    return out


def node_outputs(model: CgcnModel, s: ShiftOperator, x: np.ndarray) -> np.ndarray:
    h = np.asarray(x, dtype=np.float64)
    for layer in model.layers:
        h = layer_forward(layer, layer_kernel_features(layer, s, h))
    return h


def model_forward(model: CgcnModel, graph: Graph, x: np.ndarray) -> np.ndarray:
    """Class scores for one graph."""
    s = build_shift_operator(graph, model.shift_kind)
    return model.readout(node_outputs(model, s, x).sum(axis=0))


def pooled_batch(model: CgcnModel, graphs: Sequence[Graph], signals: Sequence[np.ndarray]) -> np.ndarray:
    """Sum-pooled final node features for many graphs at once."""
    batch = GraphBatch([build_shift_operator(g, model.shift_kind) for g in graphs])
    h = node_outputs(model, batch.shift, np.vstack(signals))
    return batch.sum_pool(h)


def predict_scores(model: CgcnModel, graphs: Sequence[Graph], signals: Sequence[np.ndarray]) -> np.ndarray:
    return model.readout(pooled_batch(model, graphs, signals))
