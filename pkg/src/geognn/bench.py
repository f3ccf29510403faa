"""GNN-run ledger and the per-query subgraph-labelling baseline."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ComputationRecord
from .gnn import add_mlp_head, apply_mlp_head, gnn_forward, init_params
from .graph import Graph, induced_subgraph
from .geodesic import bfs_distances
from .pooling import DistanceCache, PoolConfig, build_edge_plan, edge_block
from .training import concat_edge_plans, input_features

METHODS = ("gdgnn", "subgraph-baseline")
BENCH_HEADER = "method,queries,gnn_forwards,geodesic_extractions,seconds_phase,seconds_total"


@dataclass
class RunLedger:
    method: str = ""
    queries: int = 0
    gnn_forward_count: int = 0
    geodesic_extraction_count: int = 0
    seconds: dict[str, float] = field(default_factory=dict)

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - t0

    @property
    def total_seconds(self) -> float:
        return sum(self.seconds.values())

    def csv_row(self) -> str:
        phases = ";".join(f"{k}={v:.4f}" for k, v in self.seconds.items())
        return (f"{self.method},{self.queries},{self.gnn_forward_count},"
                f"{self.geodesic_extraction_count},{phases},{self.total_seconds:.4f}")


@dataclass(frozen=True)
class BaselineConfig:
    radius: int = 2

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    @property
    def label_dim(self) -> int:
        return (self.radius + 2) ** 2


def drnl_like_label(g: Graph, u: int, v: int, radius: int):
    """Enclosing subgraph of ``(u, v)`` with distance-pair node labels.

    Returns ``(subgraph, labels, nodes)``: ``nodes[i]`` is the original id of
    subgraph node ``i`` (``u`` first, ``v`` second), ``labels[i]`` is the pair
    ``(d(w, u), d(w, v))`` measured with the target edge removed, with
    ``radius + 1`` standing for "farther than radius".  The endpoints carry
    the fixed labels ``(0, 1)`` and ``(1, 0)``.  The subgraph's feature matrix
    is the one-hot encoding of the labels, and the target edge is absent.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    excl = (u, v)
    du = bfs_distances(g, u, radius, excl).dist
    dv = bfs_distances(g, v, radius, excl).dist
    inside = np.flatnonzero((du >= 0) | (dv >= 0))
    rest = inside[(inside != u) & (inside != v)]
    nodes = np.concatenate([[u, v], rest]) if u != v else np.concatenate([[u], rest])
    far = radius + 1
    labels = np.stack([np.where(du[nodes] < 0, far, du[nodes]),
                       np.where(dv[nodes] < 0, far, dv[nodes])], axis=1)
    if u != v:
        labels[0], labels[1] = (0, 1), (1, 0)
    sub = induced_subgraph(g, nodes)
    if u != v and sub.has_edge(0, 1):
        sub = sub.without_edges(np.array([[0, 1]]))
    onehot = np.zeros((len(nodes), (radius + 2) ** 2))
    onehot[np.arange(len(nodes)), labels[:, 0] * (radius + 2) + labels[:, 1]] = 1.0
    sub = Graph(sub.num_nodes, sub.offsets, sub.neighbors, sub.edge_labels, onehot, sub.undirected)
    return sub, labels, nodes


def disjoint_queries(g: Graph, k: int, seed=0) -> np.ndarray:
    """``k`` link queries with pairwise-disjoint endpoints, existing edges first."""
    rng = np.random.default_rng(seed)
    edges = g.edge_array()[rng.permutation(g.num_edges)]
    used = np.zeros(g.num_nodes, bool)
    out = []
    for a, b in edges:
        if len(out) == k:
            break
        if not used[a] and not used[b]:
            used[a] = used[b] = True
            out.append((a, b))
    free = rng.permutation(np.flatnonzero(~used))
    while len(out) < k and len(free) >= 2:
        out.append((free[0], free[1]))
        free = free[2:]
    if len(out) < k:
        raise ValueError(f"graph has room for only {len(out)} disjoint queries")
    return np.array(out, dtype=np.int64)


def parallel_edge_plan(g: Graph, queries, cfg: PoolConfig, threads: int = 1, ledger=None):
    """Geodesic extraction fanned out over ``threads`` workers, each with its own cache."""
    queries = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
    if threads <= 1 or len(queries) < 2:
        return build_edge_plan(g, queries, cfg, cache=DistanceCache(g, cfg.d_max), ledger=ledger)
    chunks = np.array_split(queries, threads)
    with ThreadPoolExecutor(threads) as pool:
        plans = list(pool.map(lambda c: build_edge_plan(g, c, cfg), chunks))
    if ledger is not None:
        ledger.geodesic_extraction_count += len(queries)
    plan = plans[0]
    for p in plans[1:]:
        plan = concat_edge_plans(plan, p)
    return plan


def run_benchmark(g: Graph, queries, method: str = "gdgnn", pool: PoolConfig | None = None,
                  baseline: BaselineConfig | None = None, kind: str = "gcn", layers: int = 3,
                  hidden: int = 32, seed: int = 0, dtype=np.float32, threads: int = 1):
    """Score every query once and account GNN runs and wall-clock per phase.

    Both methods share the GNN shape and the two-layer readout head, so the
    comparison isolates the cost of per-query GNN runs.  Returns
    ``(ledger, scores)``.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    queries = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
    if len(queries) == 0:
        raise ValueError("no queries")
    pool = pool or PoolConfig(d_max=layers)
    baseline = baseline or BaselineConfig()
    rng = np.random.default_rng(seed)
    ledger = RunLedger(method, len(queries))
    if method == "gdgnn":
        x = input_features(g, True)
        params = init_params(kind, x.shape[1], hidden, layers, rng)
        add_mlp_head(params, pool.edge_dim(hidden), hidden, 1, rng)
        params = params.astype(dtype)
        with ledger.phase("geodesic"):
            plan = parallel_edge_plan(g, queries, pool, threads, ledger)
        with ledger.phase("gnn"):
            rec = ComputationRecord()
            gnn_forward(g, x, params, rec, ledger)
            h = rec.output
        with ledger.phase("head"):
            scores = apply_mlp_head(rec, params, edge_block(rec, h, plan, pool)).value.ravel()
        return ledger, scores

    params = init_params(kind, baseline.label_dim, hidden, layers, rng)
    add_mlp_head(params, 3 * hidden, hidden, 1, rng)
    params = params.astype(dtype)
    scores = np.empty(len(queries))
    for i, (u, v) in enumerate(queries):
        with ledger.phase("extract"):
            sub, _, _ = drnl_like_label(g, int(u), int(v), baseline.radius)
            ledger.geodesic_extraction_count += 1
        with ledger.phase("gnn"):
            rec = ComputationRecord()
            gnn_forward(sub, sub.features, params, rec, ledger)
            h = rec.output
        with ledger.phase("head"):
            pooled = rec.segment_reduce(h, np.zeros(sub.num_nodes, np.int64), 1, "sum")
            second = np.array([1 if sub.num_nodes > 1 else 0])
            z = rec.concat([pooled, rec.gather(h, np.array([0])), rec.gather(h, second)])
            scores[i] = apply_mlp_head(rec, params, z).value.item()
    return ledger, scores
