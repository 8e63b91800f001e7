"""TUDataset ingestion, model archives and key-value config files."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .factorization import FactorizedKernel
from .graph import Graph
from .kernels import KernelSpec
from .model import CgcnLayer, CgcnModel, Readout
from .trainer import Dataset, GraphSample, TrainConfig


class DatasetFormatError(ValueError):
    pass


class ArchiveError(ValueError):
    pass


class ChecksumError(ArchiveError):
    pass


class VersionError(ArchiveError):
    pass


# -- TUDataset ---------------------------------------------------------------


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    directory: str
    num_graphs: int
    num_nodes: int
    num_edges: int
    num_classes: int
    feature_source: str


def _read_rows(path: Path, width: int | None = None, kind=int) -> list[list]:
    if not path.exists():
        raise DatasetFormatError(f"missing file {path}")
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                vals = [kind(p) for p in parts]
            except ValueError:
                raise DatasetFormatError(f"{path.name}:{lineno}: non-numeric field in {line!r}") from None
            if width is not None and len(vals) != width:
                raise DatasetFormatError(f"{path.name}:{lineno}: expected {width} fields, got {len(vals)}")
            rows.append(vals)
    return rows


def load_tudataset(directory, name: str | None = None) -> Dataset:
    """Read a dataset in the TUDataset plain-text layout.

    Node features come from ``<DS>_node_attributes.txt`` if present, else a
    one-hot encoding of ``<DS>_node_labels.txt``, else a constant 1.
    ``name`` defaults to the directory name.
    """
    return load_tudataset_with_manifest(directory, name)[0]


def load_tudataset_with_manifest(directory, name: str | None = None) -> tuple[Dataset, DatasetManifest]:
    directory = Path(directory)
    name = name or directory.name
    base = directory / name
    indicator = [r[0] for r in _read_rows(Path(f"{base}_graph_indicator.txt"), 1)]
    graph_labels = [r[0] for r in _read_rows(Path(f"{base}_graph_labels.txt"), 1)]
    edges = _read_rows(Path(f"{base}_A.txt"), 2)
    n_total = len(indicator)
    n_graphs = len(graph_labels)
    for i, gid in enumerate(indicator, 1):
        if not 1 <= gid <= n_graphs:
            raise DatasetFormatError(f"{name}_graph_indicator.txt:{i}: graph id {gid} outside [1, {n_graphs}]")
    indicator_arr = np.asarray(indicator) - 1
    local = np.zeros(n_total, dtype=np.int64)
    counts = np.zeros(n_graphs, dtype=np.int64)
    for v, gid in enumerate(indicator_arr):
        local[v] = counts[gid]
        counts[gid] += 1

    per_graph_edges: list[list[tuple[int, int]]] = [[] for _ in range(n_graphs)]
    for lineno, (a, b) in enumerate(edges, 1):
        if not (1 <= a <= n_total and 1 <= b <= n_total):
            raise DatasetFormatError(f"{name}_A.txt:{lineno}: dangling node index in ({a}, {b})")
        ga, gb = indicator_arr[a - 1], indicator_arr[b - 1]
        if ga != gb:
            raise DatasetFormatError(f"{name}_A.txt:{lineno}: edge ({a}, {b}) joins different graphs")
        per_graph_edges[ga].append((local[a - 1], local[b - 1]))

    attr_path = Path(f"{base}_node_attributes.txt")
    label_path = Path(f"{base}_node_labels.txt")
    if attr_path.exists():
        x_all = np.asarray(_read_rows(attr_path, kind=float), dtype=np.float64)
        source = "node-attributes"
    elif label_path.exists():
        node_labels = [r[0] for r in _read_rows(label_path, 1)]
        values = sorted(set(node_labels))
        lookup = {v: i for i, v in enumerate(values)}
        x_all = np.eye(len(values))[[lookup[v] for v in node_labels]]
        source = "one-hot-node-labels"
    else:
        x_all = np.ones((n_total, 1))
        source = "constant-ones"
    if x_all.shape[0] != n_total:
        raise DatasetFormatError(f"{source} has {x_all.shape[0]} rows for {n_total} nodes")

    classes = sorted(set(graph_labels))
    class_index = {c: i for i, c in enumerate(classes)}
    order = np.argsort(indicator_arr, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])
    samples = []
    for gid in range(n_graphs):
        nodes = order[starts[gid] : starts[gid + 1]]
        g = Graph.from_edges(int(counts[gid]), per_graph_edges[gid])
        samples.append(GraphSample(g, x_all[nodes], class_index[graph_labels[gid]]))
    ds = Dataset(tuple(samples), len(classes), name)
    info = DatasetManifest(
        name,
        str(directory),
        n_graphs,
        n_total,
        sum(s.graph.num_edges for s in samples),
        len(classes),
        source,
    )
    return ds, info


def write_tudataset(ds: Dataset, directory, name: str) -> None:
    """Write ``ds`` in TUDataset layout; signals go to node attributes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = directory / name
    a_lines, ind_lines, attr_lines = [], [], []
    offset = 0
    for gid, s in enumerate(ds.samples, 1):
        g = s.graph
        for i, j in zip(g.src, g.dst):
            a_lines.append(f"{i + 1 + offset}, {j + 1 + offset}")
        ind_lines.extend([str(gid)] * g.num_nodes)
        attr_lines.extend(", ".join(repr(float(v)) for v in row) for row in s.signal)
        offset += g.num_nodes
    Path(f"{base}_A.txt").write_text("\n".join(a_lines) + "\n")
    Path(f"{base}_graph_indicator.txt").write_text("\n".join(ind_lines) + "\n")
    Path(f"{base}_graph_labels.txt").write_text("\n".join(str(s.label) for s in ds.samples) + "\n")
    Path(f"{base}_node_attributes.txt").write_text("\n".join(attr_lines) + "\n")


# -- model archive -----------------------------------------------------------
#
# layout: b"CGCN" | u8 version | u64 header length | JSON header |
#         float64 little-endian blob | 32-byte SHA-256 of everything before

MAGIC = b"CGCN"
FORMAT_VERSION = 1


class _Blob:
    def __init__(self):
        self.parts: list[bytes] = []
        self.offset = 0

    def add(self, arr) -> dict:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        ref = {"offset": self.offset, "shape": list(arr.shape)}
        data = arr.tobytes(order="C")
        self.parts.append(data)
        self.offset += len(data)
        return ref


def _kernel_meta(fk: FactorizedKernel, blob: _Blob) -> dict:
    return {
        "kind": fk.spec.kind,
        "gamma": fk.spec.gamma,
        "hop": fk.hop,
        "rcond": fk.rcond,
        "landmark_indices": [int(i) for i in fk.landmark_indices],
        "references": blob.add(fk.references),
        "u": blob.add(fk.u),
        "sigma": blob.add(fk.sigma),
        "vt": blob.add(fk.vt),
    }


def archive_bytes(model: CgcnModel, version: int = FORMAT_VERSION) -> bytes:
    blob = _Blob()
    header = {
        "shift_kind": model.shift_kind,
        "config": model.config,
        "layers": [
            {
                "hops": layer.hops,
                "budget": layer.budget,
                "kernels": [_kernel_meta(fk, blob) for fk in layer.kernels],
                "filters": [blob.add(a) for a in layer.filters],
            }
            for layer in model.layers
        ],
        "hidden_readouts": [{"matrix": blob.add(r.matrix), "bias": blob.add(r.bias)} for r in model.hidden_readouts],
        "readout": {"matrix": blob.add(model.readout.matrix), "bias": blob.add(model.readout.bias)},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = MAGIC + struct.pack("<BQ", version, len(head)) + head + b"".join(blob.parts)
    return body + hashlib.sha256(body).digest()


def save_model(model: CgcnModel, path) -> str:
    """Write the archive; returns its SHA-256 hex digest."""
    data = archive_bytes(model)
    Path(path).write_bytes(data)
    return data[-32:].hex()


def parse_archive(data: bytes) -> CgcnModel:
    prefix = len(MAGIC) + 9
    if len(data) < prefix or data[:4] != MAGIC:
        raise ArchiveError("not a CGCN model archive")
    version, head_len = struct.unpack("<BQ", data[4:prefix])
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported archive version {version} (expected {FORMAT_VERSION})")
    if len(data) < prefix + 32 or hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise ChecksumError("archive checksum mismatch (truncated or corrupt file)")
    header = json.loads(data[prefix : prefix + head_len])
    blob = memoryview(data)[prefix + head_len : -32]

    def arr(ref) -> np.ndarray:
        shape = tuple(ref["shape"])
        count = int(np.prod(shape)) if shape else 1
        return np.frombuffer(blob, dtype="<f8", count=count, offset=ref["offset"]).reshape(shape).astype(np.float64)

    layers = []
    for lm in header["layers"]:
        kernels = tuple(
            FactorizedKernel(
                KernelSpec(k["kind"], k["gamma"]),
                k["hop"],
                arr(k["references"]),
                np.asarray(k["landmark_indices"], dtype=np.int64),
                arr(k["u"]),
                arr(k["sigma"]),
                arr(k["vt"]),
                k["rcond"],
            )
            for k in lm["kernels"]
        )
        layers.append(CgcnLayer(lm["hops"], kernels, tuple(arr(f) for f in lm["filters"]), lm["budget"]))
    return CgcnModel(
        tuple(layers),
        Readout(arr(header["readout"]["matrix"]), arr(header["readout"]["bias"])),
        header["shift_kind"],
        tuple(Readout(arr(r["matrix"]), arr(r["bias"])) for r in header["hidden_readouts"]),
        header["config"],
    )


def load_model(path) -> CgcnModel:
    return parse_archive(Path(path).read_bytes())


# -- config files ------------------------------------------------------------

CONFIG_HELP = """\
config file: one `key = value` per line, `#` starts a comment.
  hidden_widths  comma-separated ints   hidden layer widths (default 32)
  hops           int                    shift hops K (default 1)
  kernel         gaussian-rbf | inverse-polynomial
  gamma          float                  RBF width (default 0.2)
  radius         float                  R in the nuclear budget formula (default 1)
  budgets        comma-separated floats explicit per-layer nuclear radii
  landmarks      int                    Nystrom landmarks P (default 32)
  factorization  nystrom | exact
  shift_kind     adjacency | symmetric-normalized-adjacency | laplacian | normalized-laplacian
  optimizer      projected-adam | projected-gd
  lr, beta1, beta2, eps, min_lr   floats
  auto_step      bool                   step 1/L for projected-gd
  epochs, batch_size, patience    ints  (batch_size 0 = automatic)
  init           zero | random ; init_scale float
  split          three comma-separated floats (default 0.8,0.1,0.1)
  seed           int
"""


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_PARSERS = {
    "hidden_widths": lambda s: tuple(int(v) for v in s.split(",") if v.strip()),
    "budgets": lambda s: tuple(float(v) for v in s.split(",")) if s.strip().lower() not in ("", "none") else None,
    "split": lambda s: tuple(float(v) for v in s.split(",")),
    "auto_step": _parse_bool,
}
_TYPES = {"int": int, "float": float, "str": str}


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    values = {}
    known = {f.name: f for f in fields(TrainConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        parser = _PARSERS.get(key) or _TYPES.get(str(known[key].type), str)
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {exc}") from None
    base = base or TrainConfig()
    cfg = {f.name: getattr(base, f.name) for f in fields(TrainConfig)}
    cfg.update(values)
    return TrainConfig(**cfg)


def load_config(path) -> TrainConfig:
    return parse_config_text(Path(path).read_text())


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    for key in ("hidden_widths", "split", "budgets"):
        if d.get(key) is not None:
            d[key] = tuple(d[key])
    return TrainConfig(**d)
