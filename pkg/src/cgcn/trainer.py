"""Layer-wise convex training of CGCN models."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .factorization import factorize_vectors, map_to_features, nystrom
from .graph import DEFAULT_SHIFT_KIND, Graph, GraphBatch, build_shift_operator, normalize_rows, shift_stack
from .kernels import KernelSpec
from .model import (
    CgcnLayer,
    CgcnModel,
    Readout,
    layer_forward,
    layer_kernel_features,
    predict_scores,
    split_filters,
)
from .optim import NuclearBall, OptimizerState, PlateauSchedule, nuclear_budget, project_nuclear, step

log = logging.getLogger(__name__)

FULL_BATCH_LIMIT = 1000
LARGE_BATCH = 128


@dataclass(frozen=True)
class GraphSample:
    graph: Graph
    signal: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    samples: tuple[GraphSample, ...]
    num_classes: int
    name: str = ""

    def __post_init__(self):
        dims = {s.signal.shape[1] for s in self.samples}
        if len(dims) > 1:
            raise ValueError(f"inconsistent feature dims {sorted(dims)}")
        for s in self.samples:
            if not 0 <= s.label < self.num_classes:
                raise ValueError(f"label {s.label} outside [0, {self.num_classes})")
            if s.signal.shape[0] != s.graph.num_nodes:
                raise ValueError("signal rows must match graph nodes")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def num_features(self) -> int:
        return self.samples[0].signal.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def subset(self, idx) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in idx), self.num_classes, self.name)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for :func:`train_layerwise`.

    ``hidden_widths`` lists ``F_1 .. F_{L-1}``; the last layer always emits
    one feature per class. ``budgets`` overrides the per-layer nuclear radii,
    otherwise ``nuclear_budget(radius, F_in, F_out, hops)`` is used.
    ``batch_size=0`` means full batch up to 1000 graphs, else 128.
    """

    hidden_widths: tuple[int, ...] = (32,)
    hops: int = 1
    kernel: str = "gaussian-rbf"
    gamma: float = 0.2
    radius: float = 1.0
    budgets: tuple[float, ...] | None = None
    landmarks: int = 32
    factorization: str = "nystrom"
    shift_kind: str = DEFAULT_SHIFT_KIND
    optimizer: str = "projected-adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    auto_step: bool = False
    epochs: int = 200
    batch_size: int = 0
    patience: int = 20
    min_lr: float = 1e-6
    init: str = "zero"
    init_scale: float = 0.1
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.hops < 0:
            raise ValueError("hops must be >= 0")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("layer widths must be positive")
        if len(self.split) != 3 or any(r <= 0 for r in self.split) or abs(sum(self.split) - 1) > 1e-9:
            raise ValueError("split ratios must be three positive numbers summing to 1")
        if self.factorization not in ("nystrom", "exact"):
            raise ValueError(f"unknown factorization {self.factorization!r}")
        if self.init not in ("zero", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.budgets is not None and len(self.budgets) != self.num_layers:
            raise ValueError("need one budget per layer")
        if self.landmarks < 1:
            raise ValueError("landmark count must be positive")
        KernelSpec(self.kernel, self.gamma)
        OptimizerState(self.optimizer, self.lr)

    @property
    def num_layers(self) -> int:
        return len(self.hidden_widths) + 1

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.gamma)

    def as_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


# -- data splitting -----------------------------------------------------------


def split_dataset(ds: Dataset, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffled train/validation/test split, deterministic in ``seed``."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ValueError("ratios must be three nonnegative numbers summing to 1")
    n = len(ds)
    n_val = int(round(ratios[1] * n))
    n_test = int(round(ratios[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split {tuple(ratios)} of {n} samples leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    return (
        ds.subset(perm[:n_train]),
        ds.subset(perm[n_train : n_train + n_val]),
        ds.subset(perm[n_train + n_val :]),
    )


# -- per-layer objective ------------------------------------------------------


@dataclass(frozen=True)
class LayerLoss:
    value: float
    grad: np.ndarray
    grad_bias: np.ndarray


def pool_features(per_sample: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Stack per-sample, per-hop feature signals into the pooled design matrix.

    Row ``j`` is the concatenation over hops of the column sums of sample
    ``j``'s ``(n_j, P_k)`` hop features.
    """
    return np.array([np.concatenate([z.sum(axis=0) for z in hops]) for hops in per_sample])


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shift = scores.max(axis=1, keepdims=True)
    z = scores - shift
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample multinomial logistic loss."""
    return -_log_softmax(scores)[np.arange(len(labels)), labels]


def layer_objective_and_gradient(filters: np.ndarray, pooled: np.ndarray, labels, readout: Readout) -> LayerLoss:
    """Mean multinomial logistic loss of ``pooled @ filters @ readout.matrix
    + readout.bias`` and its exact gradients in the filters and the bias.

    ``pooled`` is the output of :func:`pool_features`; since layer outputs
    are linear in the filters, sum pooling commutes with the layer map.
    """
    filters = np.asarray(filters, dtype=np.float64)
    pooled = np.asarray(pooled, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if pooled.shape[1] != filters.shape[0] or filters.shape[1] != readout.matrix.shape[0]:
        raise ValueError(
            f"shape mismatch: pooled {pooled.shape}, filters {filters.shape}, readout {readout.matrix.shape}"
        )
    if len(labels) != pooled.shape[0]:
        raise ValueError("one label per sample required")
    m = len(labels)
    scores = pooled @ filters @ readout.matrix + readout.bias
    logp = _log_softmax(scores)
    value = -logp[np.arange(m), labels].mean()
    d = np.exp(logp)
    d[np.arange(m), labels] -= 1.0
    d /= m
    return LayerLoss(float(value), pooled.T @ d @ readout.matrix.T, d.sum(axis=0))


def estimate_lipschitz(pooled: np.ndarray, readout: Readout, iters: int = 100, seed: int = 0) -> float:
    """Smoothness constant of the layer objective in ``(filters, bias)``.

    Uses the softmax curvature bound 1/2 and power iteration for the
    spectral norms of the pooled design and the readout.
    """

    def top_sq(mat: np.ndarray) -> float:
        if mat.size == 0:
            return 0.0
        v = np.random.default_rng(seed).standard_normal(mat.shape[1])
        lam = 0.0
        for _ in range(iters):
            w = mat.T @ (mat @ v)
            norm = np.linalg.norm(w)
            if norm == 0:
                return 0.0
            lam = float(v @ w / (v @ v))
            v = w / norm
        # power iteration underestimates; pad slightly
        return lam * 1.01

    m = pooled.shape[0]
    return 0.5 * (top_sq(pooled) * top_sq(readout.matrix) + m) / m


# -- layer-wise training -----------------------------------------------------


@dataclass
class LayerTrace:
    layer: int
    objectives: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)


def _frozen_readout(f_out: int, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    r = rng.standard_normal((f_out, num_classes))
    return r / np.linalg.norm(r, axis=0, keepdims=True)


def _hop_kernels(config: TrainConfig, vectors: np.ndarray, layer: int, hop: int):
    spec = config.kernel_spec
    if config.factorization == "exact":
        fk = factorize_vectors(spec, vectors, hop)
    else:
        p = min(config.landmarks, vectors.shape[0])
        fk = nystrom(spec, vectors, p, seed=[config.seed, layer, hop], hop=hop)
    return fk


def solve_layer(
    pooled: np.ndarray,
    labels: np.ndarray,
    readout_matrix: np.ndarray,
    budget: float,
    config: TrainConfig,
    layer: int = 0,
    init: np.ndarray | None = None,
    on_epoch: Callable[[int, int, float, float], None] | None = None,
):
    """Minimise the layer objective over the nuclear ball.

    Returns ``(filters, bias, trace)``.
    """
    m, d = pooled.shape
    g = readout_matrix.shape[1]
    rng = np.random.default_rng([config.seed, layer, 7])
    ball = NuclearBall(budget)
    if init is not None:
        a = np.array(init, dtype=np.float64)
    elif config.init == "random":
        a = config.init_scale * rng.standard_normal((d, readout_matrix.shape[0]))
    else:
        a = np.zeros((d, readout_matrix.shape[0]))
    a = project_nuclear(a, ball)
    bias = np.zeros(g)
    lr = config.lr
    if config.auto_step:
        lr = 1.0 / estimate_lipschitz(pooled, Readout(readout_matrix, bias))
    opt_kw = dict(kind=config.optimizer, lr=lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    state_a, state_b = OptimizerState(**opt_kw), OptimizerState(**opt_kw)
    sched = PlateauSchedule(lr, config.patience, 0.5, config.min_lr)
    batch = config.batch_size or (m if m <= FULL_BATCH_LIMIT else LARGE_BATCH)
    trace = LayerTrace(layer)
    for epoch in range(config.epochs):
        order = np.arange(m) if batch >= m else rng.permutation(m)
        for start in range(0, m, batch):
            idx = order[start : start + batch]
            res = layer_objective_and_gradient(a, pooled[idx], labels[idx], Readout(readout_matrix, bias))
            a, state_a = step(state_a, a, res.grad, ball)
            bias, state_b = step(state_b, bias, res.grad_bias, None)
        value = layer_objective_and_gradient(a, pooled, labels, Readout(readout_matrix, bias)).value
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite objective at layer {layer}, epoch {epoch}")
        trace.objectives.append(value)
        trace.learning_rates.append(state_a.lr)
        if on_epoch is not None:
            on_epoch(layer, epoch, value, state_a.lr)
        new_lr = sched.update(value)
        state_a, state_b = replace(state_a, lr=new_lr), replace(state_b, lr=new_lr)
    return a, bias, trace


def _layer_inputs(shift, h: np.ndarray, hops: int) -> list[np.ndarray]:
    stack = shift_stack(shift, normalize_rows(h), hops)
    return [normalize_rows(z) for z in stack]


def train_layerwise(
    ds: Dataset,
    config: TrainConfig,
    on_epoch: Callable[[int, int, float, float], None] | None = None,
) -> tuple[CgcnModel, list[LayerTrace]]:
    """Train every layer bottom to top, each as its own convex problem.

    Hidden layers are supervised through a frozen random readout; the last
    layer emits class scores directly and only its bias joins the filters
    as a trainable parameter.
    """
    if len(ds) == 0:
        raise ValueError("empty training set")
    batch = GraphBatch([build_shift_operator(s.graph, config.shift_kind) for s in ds.samples])
    labels = ds.labels
    g = ds.num_classes
    widths = list(config.hidden_widths) + [g]
    readout_rng = np.random.default_rng([config.seed, 1000])
    h = np.vstack([s.signal for s in ds.samples])
    layers, hidden_readouts, traces = [], [], []
    final_bias = np.zeros(g)
    for li, f_out in enumerate(widths):
        f_in = h.shape[1]
        kernels, feats = [], []
        for k, z in enumerate(_layer_inputs(batch.shift, h, config.hops)):
            fk = _hop_kernels(config, z, li, k)
            if fk.width == 0:
                raise ValueError(f"degenerate kernel factorization at layer {li}, hop {k}")
            feats.append(map_to_features(fk, z))
            kernels.append(replace(fk, q_matrix=None))
        pooled = np.hstack([batch.sum_pool(f) for f in feats])
        last = li == len(widths) - 1
        r = np.eye(g) if last else _frozen_readout(f_out, g, readout_rng)
        budget = config.budgets[li] if config.budgets is not None else nuclear_budget(config.radius, f_in, f_out, config.hops)
        a, bias, trace = solve_layer(pooled, labels, r, budget, config, li, on_epoch=on_epoch)
        traces.append(trace)
        layer = CgcnLayer(config.hops, tuple(kernels), split_filters(a, [fk.width for fk in kernels]), budget)
        layers.append(layer)
        if last:
            final_bias = bias
        else:
            hidden_readouts.append(Readout(r, bias))
            h = layer_forward(layer, feats)
        log.info("layer %d: objective %.6f", li, trace.objectives[-1])
    model = CgcnModel(
        tuple(layers),
        Readout(np.eye(g), final_bias),
        config.shift_kind,
        tuple(hidden_readouts),
        config.as_dict(),
    )
    return model, traces


def layer_designs(model: CgcnModel, ds: Dataset) -> list[np.ndarray]:
    """Pooled design matrix of every layer of ``model`` on ``ds``.

    Entry ``l`` is the ``(m, sum_k P_k)`` matrix whose product with layer
    ``l``'s stacked filters gives the sum-pooled outputs of that layer.
    """
    batch = GraphBatch([build_shift_operator(s.graph, model.shift_kind) for s in ds.samples])
    h = np.vstack([s.signal for s in ds.samples])
    designs = []
    for layer in model.layers:
        feats = layer_kernel_features(layer, batch.shift, h)
        designs.append(np.hstack([batch.sum_pool(f) for f in feats]))
        h = layer_forward(layer, feats)
    return designs


# -- evaluation ----------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    mean_loss: float


def evaluate(model: CgcnModel, ds: Dataset) -> Metrics:
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    scores = predict_scores(model, [s.graph for s in ds.samples], [s.signal for s in ds.samples])
    labels = ds.labels
    acc = float(np.mean(np.argmax(scores, axis=1) == labels))
    return Metrics(acc, float(cross_entropy(scores, labels).mean()))


@dataclass(frozen=True)
class GapRow:
    m: int
    train_loss: float
    test_loss: float

    @property
    def gap(self) -> float:
        return self.test_loss - self.train_loss


def generalization_gap_probe(
    config: TrainConfig,
    make_dataset: Callable[[int, int], Dataset],
    m_values: Sequence[int],
    seeds: Sequence[int],
    test_size: int = 500,
) -> list[GapRow]:
    """Train on ``m`` synthetic samples per seed and average train and test
    losses. ``make_dataset(size, seed)`` draws a fresh sample."""
    if list(m_values) != sorted(set(m_values)):
        raise ValueError("m values must be strictly increasing")
    rows = []
    for m in m_values:
        train_losses, test_losses = [], []
        for s in seeds:
            train = make_dataset(m, 2 * s)
            test = make_dataset(test_size, 2 * s + 1)
            model, _ = train_layerwise(train, replace(config, seed=s))
            train_losses.append(evaluate(model, train).mean_loss)
            test_losses.append(evaluate(model, test).mean_loss)
        rows.append(GapRow(m, float(np.mean(train_losses)), float(np.mean(test_losses))))
    return rows
