"""One-shot message-passing GNN (GCN- or GIN-style layers) with exact gradients."""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .autodiff import ComputationRecord, Node
from .graph import Graph

CHECKPOINT_VERSION = 1

EmbeddingMatrix = np.ndarray


class ForwardCounter:
    """Counts gnn_forward evaluations; one increment per evaluated graph."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0


forward_counter = ForwardCounter()


@dataclass
class ModelParams:
    kind: str  # "gcn" or "gin"
    depth: int
    hidden: int
    in_dim: int
    values: dict[str, np.ndarray] = field(default_factory=dict)
    activation: str = "relu"

    def gnn_names(self):
        return [k for k in self.values if k.startswith("gnn.")]

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.kind, self.depth, self.hidden, self.in_dim,
                           {k: v.astype(dtype) for k, v in self.values.items()},
                           self.activation)

    def copy(self) -> "ModelParams":
        return ModelParams(self.kind, self.depth, self.hidden, self.in_dim,
                           {k: v.copy() for k, v in self.values.items()}, self.activation)

    @property
    def out_dim(self) -> int:
        return self.hidden if self.depth else self.in_dim


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def init_params(kind: str, in_dim: int, hidden: int, depth: int,
                rng: np.random.Generator, activation: str = "relu") -> ModelParams:
    if kind not in ("gcn", "gin"):
        raise ValueError(f"unknown layer kind {kind!r}")
    values = {}
    dim = in_dim
    for i in range(depth):
        if kind == "gcn":
            values[f"gnn.{i}.W"] = _glorot(rng, dim, hidden)
            values[f"gnn.{i}.b"] = np.zeros((1, hidden))
        else:
            values[f"gnn.{i}.eps"] = np.zeros(1)
            values[f"gnn.{i}.W1"] = _glorot(rng, dim, hidden)
            values[f"gnn.{i}.b1"] = np.zeros((1, hidden))
            values[f"gnn.{i}.W2"] = _glorot(rng, hidden, hidden)
            values[f"gnn.{i}.b2"] = np.zeros((1, hidden))
        dim = hidden
    return ModelParams(kind, depth, hidden, in_dim, values, activation)


def add_mlp_head(params: ModelParams, in_dim: int, hidden: int, out_dim: int,
                 rng: np.random.Generator, prefix: str = "head") -> None:
    """Two-layer perceptron readout stored alongside the GNN weights."""
    params.values[f"{prefix}.W1"] = _glorot(rng, in_dim, hidden)
    params.values[f"{prefix}.b1"] = np.zeros((1, hidden))
    params.values[f"{prefix}.W2"] = _glorot(rng, hidden, out_dim)
    params.values[f"{prefix}.b2"] = np.zeros((1, out_dim))


def apply_mlp_head(record: ComputationRecord, params: ModelParams, z: Node,
                   prefix: str = "head") -> Node:
    p = lambda name: record.param(f"{prefix}.{name}", params.values[f"{prefix}.{name}"])
    hid = record.relu(record.add(record.matmul(z, p("W1")), p("b1")))
    return record.add(record.matmul(hid, p("W2")), p("b2"))


_norm_cache: "weakref.WeakKeyDictionary[Graph, dict]" = weakref.WeakKeyDictionary()


def propagation_matrix(g: Graph, kind: str, dtype=np.float64) -> sp.csr_matrix:
    """Sparse operator used by one layer: sym-normalised ``A + I`` for GCN, ``A`` for GIN."""
    cache = _norm_cache.setdefault(g, {})
    key = (kind, np.dtype(dtype).str)
    if key not in cache:
        adj = g.adjacency.astype(dtype)
        if kind == "gcn":
            a_hat = (adj + sp.identity(g.num_nodes, dtype=dtype, format="csr")).tocsr()
            inv_sqrt = 1.0 / np.sqrt(np.asarray(a_hat.sum(axis=1)).ravel())
            d = sp.diags(inv_sqrt.astype(dtype))
            mat = (d @ a_hat @ d).tocsr()
        else:
            mat = adj.tocsr()
        mat.sort_indices()
        cache[key] = mat
    return cache[key]


def default_features(g: Graph, dtype=np.float64) -> np.ndarray:
    if g.features is not None:
        return g.features.astype(dtype)
    return np.ones((g.num_nodes, 1), dtype=dtype)


def gnn_forward(g: Graph, x: np.ndarray | None, params: ModelParams,
                record: ComputationRecord | None = None, ledger=None):
    """Run every layer once over the whole graph.

    Returns ``(embeddings, record)``; ``record.output`` is the embedding node
    so callers can keep recording a head on the same tape.
    """
    record = ComputationRecord() if record is None else record
    dtype = next(iter(params.values.values())).dtype if params.values else np.float64
    x = default_features(g, dtype) if x is None else np.asarray(x, dtype=dtype)
    if x.ndim != 2 or x.shape != (g.num_nodes, params.in_dim):
        raise ValueError(f"features of shape {x.shape} do not match "
                         f"({g.num_nodes}, {params.in_dim})")
    act = record.relu if params.activation == "relu" else record.identity
    prop = propagation_matrix(g, params.kind, dtype)
    p = lambda name: record.param(name, params.values[name])
    h = record.const(x)
    for i in range(params.depth):
        if params.kind == "gcn":
            agg = record.spmm(prop, h, kind="normalized_neighbor_sum")
            h = record.add(record.matmul(agg, p(f"gnn.{i}.W")), p(f"gnn.{i}.b"))
        else:
            agg = record.spmm(prop, h)
            comb = record.scale_add(p(f"gnn.{i}.eps"), h, agg)
            mid = act(record.add(record.matmul(comb, p(f"gnn.{i}.W1")), p(f"gnn.{i}.b1")))
            h = record.add(record.matmul(mid, p(f"gnn.{i}.W2")), p(f"gnn.{i}.b2"))
        if i < params.depth - 1:
            h = act(h)
    record.output = h
    forward_counter.count += 1
    if ledger is not None:
        ledger.gnn_forward_count += 1
    return h.value, record


def backward(record: ComputationRecord, out_grad, output: Node | None = None) -> dict[str, np.ndarray]:
    """Parameter gradients of ``<out_grad, output>``; ``output`` defaults to the last step."""
    return record.backward(output, out_grad)


def finite_difference_check(g: Graph, x, params: ModelParams,
                            loss: Callable[[ComputationRecord, Node], Node] | None = None,
                            step: float = 1e-5, max_coords: int | None = None,
                            rng: np.random.Generator | None = None,
                            floor: float = 1e-6) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss(record, embeddings_node)`` must return a 1x1 node.  The default loss
    is a random weighted sum of the embeddings.  When the model has more than
    ``max_coords`` coordinates a random subset of that size is checked.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if loss is None:
        w = rng.standard_normal((g.num_nodes, params.out_dim))
        loss = lambda rec, h: rec.weighted_sum(h, w)

    def evaluate(p):
        _, rec = gnn_forward(g, x, p)
        out = loss(rec, rec.output)
        return out.value.item(), rec, out

    _, rec, out = evaluate(params)
    grads = rec.backward(out)
    coords = [(name, idx) for name, arr in params.values.items()
              for idx in np.ndindex(arr.shape)]
    if max_coords is not None and len(coords) > max_coords:
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]
    worst = 0.0
    for name, idx in coords:
        arr = params.values[name]
        orig = arr[idx]
        arr[idx] = orig + step
        lp = evaluate(params)[0]
        arr[idx] = orig - step
        lm = evaluate(params)[0]
        arr[idx] = orig
        numeric = (lp - lm) / (2 * step)
        analytic = grads[name][idx]
        err = abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, params: ModelParams, meta: dict | None = None,
                    extra_arrays: dict[str, np.ndarray] | None = None) -> None:
    """Versioned ``.npz`` dump: a JSON header with shapes plus one array per parameter."""
    header = {
        "version": CHECKPOINT_VERSION,
        "kind": params.kind, "depth": params.depth, "hidden": params.hidden,
        "in_dim": params.in_dim, "activation": params.activation,
        "shapes": {k: list(v.shape) for k, v in params.values.items()},
        "dtypes": {k: v.dtype.str for k, v in params.values.items()},
        "meta": meta or {},
    }
    arrays = {f"param/{k}": v for k, v in params.values.items()}
    for k, v in (extra_arrays or {}).items():
        arrays[f"extra/{k}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict, dict[str, np.ndarray]]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        values = {}
        for name, shape in header["shapes"].items():
            arr = data[f"param/{name}"]
            if list(arr.shape) != shape:
                raise ValueError(f"shape mismatch for {name}")
            values[name] = arr.copy()
        extra = {k[len("extra/"):]: data[k].copy() for k in data.files if k.startswith("extra/")}
    params = ModelParams(header["kind"], header["depth"], header["hidden"],
                         header["in_dim"], values, header.get("activation", "relu"))
    return params, header["meta"], extra
