"""Geodesic pooling: pair-wise geodesic vectors and node/edge/graph representations.

Two routes produce the same numbers:

* the direct functions (``pool_horizontal`` ... ``graph_representation``)
  evaluate one target at a time from an embedding matrix;
* the plan builders (``build_edge_plan``, ``build_node_plan``) precompute the
  integer structure for many targets once, and the ``*_block`` executors
  replay it on a :class:`ComputationRecord` so gradients reach the GNN.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .autodiff import ComputationRecord, Node
from .geodesic import (UNREACHABLE, DistanceMap, VerticalGeodesic, bfs_distances,
                       horizontal_geodesic, vertical_geodesic, vertical_geodesic_one_side)
from .graph import Graph, induced_degrees

REDUCERS = ("sum", "mean", "max")


class Variant(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    VERTICAL_DEG = "vertdeg"
    DIST_ONLY = "dist"
    NEIGHBOR_ONLY = "neighbor"

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("_", "-")
        aliases = {
            "hor": cls.HORIZONTAL, "horizontal": cls.HORIZONTAL,
            "vert": cls.VERTICAL, "vertical": cls.VERTICAL,
            "vertdeg": cls.VERTICAL_DEG, "vert-deg": cls.VERTICAL_DEG,
            "verticaldeg": cls.VERTICAL_DEG, "vertical-deg": cls.VERTICAL_DEG,
            "dist": cls.DIST_ONLY, "distonly": cls.DIST_ONLY, "dist-only": cls.DIST_ONLY,
            "neighbor": cls.NEIGHBOR_ONLY, "neighboronly": cls.NEIGHBOR_ONLY,
            "neighbor-only": cls.NEIGHBOR_ONLY, "nei": cls.NEIGHBOR_ONLY,
        }
        if key not in aliases:
            raise ValueError(f"unknown variant {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class PoolConfig:
    variant: Variant = Variant.VERTICAL
    reducer: str = "sum"
    d_max: int = 3
    node_k: int | None = None
    node_reducer: str = "sum"
    graph_reducer: str = "mean"
    horizontal_distance: bool = False
    tie_policy: str = "lexicographic"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.node_k is None:
            object.__setattr__(self, "node_k", self.d_max)
        if not 1 <= self.node_k <= self.d_max:
            raise ValueError("node_k must lie in [1, d_max]")
        for r in (self.reducer, self.node_reducer, self.graph_reducer):
            if r not in REDUCERS:
                raise ValueError(f"unknown reducer {r!r}")
        if self.tie_policy not in ("lexicographic", "seeded-random"):
            raise ValueError(f"unknown tie policy {self.tie_policy!r}")

    @property
    def uses_embeddings(self) -> bool:
        return self.variant is not Variant.DIST_ONLY

    @property
    def uses_degree(self) -> bool:
        return self.variant is Variant.VERTICAL_DEG

    @property
    def uses_distance(self) -> bool:
        if self.variant is Variant.HORIZONTAL:
            return self.horizontal_distance
        return self.variant is not Variant.NEIGHBOR_ONLY

    @property
    def distance_dim(self) -> int:
        return self.d_max + 2

    def bucket(self, d: int) -> int:
        """One-hot slot for a distance: 0..d_max, or the INFINITE slot."""
        return self.d_max + 1 if d == UNREACHABLE or d > self.d_max else int(d)

    def pair_dim(self, hidden: int) -> int:
        return (hidden if self.uses_embeddings else 0) + int(self.uses_degree) \
            + (self.distance_dim if self.uses_distance else 0)

    def edge_dim(self, hidden: int) -> int:
        return self.pair_dim(hidden) + 2 * hidden

    def node_dim(self, hidden: int) -> int:
        return self.pair_dim(hidden) + hidden


def _reduce(rows: np.ndarray, reducer: str, width: int) -> np.ndarray:
    if len(rows) == 0:
        return np.zeros(width)
    if reducer == "sum":
        return rows.sum(axis=0)
    if reducer == "mean":
        return rows.mean(axis=0)
    return rows.max(axis=0)


def _onehot(cfg: PoolConfig, d: int) -> np.ndarray:
    out = np.zeros(cfg.distance_dim)
    out[cfg.bucket(d)] = 1.0
    return out


# ------------------------------------------------------------ direct route

def pool_horizontal(h: np.ndarray, path, cfg: PoolConfig) -> np.ndarray:
    """Reduce embeddings along one shortest path (endpoints included)."""
    width = h.shape[1]
    if path is None:
        parts = [np.zeros(width)]
        d = UNREACHABLE
    else:
        nodes = list(getattr(path, "path", path))
        parts = [_reduce(h[nodes], cfg.reducer, width)]
        d = len(nodes) - 1
    if cfg.uses_distance:
        parts.append(_onehot(cfg, d))
    return np.concatenate(parts)


def pool_vertical(h: np.ndarray, gd, cfg: PoolConfig, *, distance: int | None = None,
                  graph: Graph | None = None) -> np.ndarray:
    """Reduce ``h_w (+ geodesic degree)`` over a vertical geodesic, then append distance.

    ``gd`` is a :class:`VerticalGeodesic` (degrees taken jointly over both
    sides) or a plain node set, in which case ``distance`` is the pair distance
    and degrees are computed on that set alone via ``graph``.  ``None`` marks a
    pair beyond the cutoff.
    """
    width = h.shape[1]
    if gd is None:
        nodes, degs, d = [], {}, UNREACHABLE
    elif isinstance(gd, VerticalGeodesic):
        nodes, degs, d = gd.nodes, gd.degrees, gd.distance
    else:
        if distance is None:
            raise ValueError("distance is required when pooling a bare node set")
        nodes, d = sorted(gd), distance
        degs = induced_degrees(graph, nodes) if (cfg.uses_degree and graph is not None) else {}
        if cfg.uses_degree and graph is None:
            raise ValueError("graph is required for the degree channel")
    parts = []
    if cfg.uses_embeddings:
        parts.append(_reduce(h[nodes], cfg.reducer, width))
    if cfg.uses_degree:
        parts.append(_reduce(np.array([[degs[w]] for w in nodes], dtype=float).reshape(-1, 1),
                             cfg.reducer, 1))
    if cfg.uses_distance:
        parts.append(_onehot(cfg, d))
    return np.concatenate(parts) if parts else np.zeros(0)


class DistanceCache:
    """Small LRU of per-source distance maps, reused across queries sharing an endpoint."""

    def __init__(self, g: Graph, d_max: int, maxsize: int = 256):
        self.g, self.d_max, self.maxsize = g, d_max, maxsize
        self._maps: OrderedDict[int, DistanceMap] = OrderedDict()
        self.extractions = 0

    def get(self, source: int, exclude_edge=None) -> DistanceMap:
        if exclude_edge is not None:
            self.extractions += 1
            return bfs_distances(self.g, source, self.d_max, exclude_edge)
        m = self._maps.get(source)
        if m is None:
            self.extractions += 1
            m = bfs_distances(self.g, source, self.d_max)
            self._maps[source] = m
            if len(self._maps) > self.maxsize:
                self._maps.popitem(last=False)
        else:
            self._maps.move_to_end(source)
        return m


def pair_geodesic(g: Graph, u: int, v: int, cfg: PoolConfig, cache: DistanceCache | None = None,
                  exclude_edge: bool = False, rng=None):
    """Raw geodesic of a pair under ``cfg.variant``.

    Returns ``(members, degrees, distance)`` where ``members`` is the list of
    nodes whose embeddings get pooled.
    """
    cache = DistanceCache(g, cfg.d_max) if cache is None else cache
    excl = (u, v) if exclude_edge else None
    if u == v:
        return [], {}, 0
    if cfg.variant is Variant.NEIGHBOR_ONLY:
        d = cache.get(u, excl)[v] if cfg.uses_distance else UNREACHABLE
        return [u, v], {}, d
    dmap_u = cache.get(u, excl)
    d = dmap_u[v]
    if cfg.variant is Variant.DIST_ONLY:
        return [], {}, d
    if d == UNREACHABLE:
        return [], {}, UNREACHABLE
    dmap_v = cache.get(v, excl)
    if excl is not None and g.has_edge(u, v):
        # the hidden edge must not reappear through the neighbor lists either
        g = g.without_edges(np.array([excl]))
    if cfg.variant is Variant.HORIZONTAL:
        if cfg.tie_policy == "seeded-random" and rng is None:
            rng = np.random.default_rng(cfg.seed)
        path = horizontal_geodesic(g, u, v, dmap_v, cfg.tie_policy, rng)
        return list(path.path), {}, d
    gd = vertical_geodesic(g, u, v, dmap_u, dmap_v)
    return gd.nodes, gd.degrees, d


def edge_representation(g: Graph, h: np.ndarray, u: int, v: int, cfg: PoolConfig,
                        cache: DistanceCache | None = None, exclude_edge: bool = False) -> np.ndarray:
    """Pair geodesic vector followed by the raw endpoint embeddings ``h_u, h_v``."""
    members, degs, d = pair_geodesic(g, u, v, cfg, cache, exclude_edge)
    width = h.shape[1]
    parts = []
    if cfg.uses_embeddings:
        parts.append(_reduce(h[members], cfg.reducer, width))
    if cfg.uses_degree:
        parts.append(_reduce(np.array([degs[w] for w in members], float).reshape(-1, 1),
                             cfg.reducer, 1))
    if cfg.uses_distance:
        parts.append(_onehot(cfg, d))
    parts += [h[u], h[v]]
    return np.concatenate(parts)


def node_representation(g: Graph, h: np.ndarray, v: int, cfg: PoolConfig) -> np.ndarray:
    """Pool one-sided geodesics from ``v`` to every node within ``node_k`` hops, then append ``h_v``."""
    if cfg.variant is Variant.HORIZONTAL:
        raise ValueError("horizontal geodesics are not defined for node targets")
    dmap = bfs_distances(g, v, cfg.d_max)
    width = h.shape[1]
    ring = [int(s) for s in np.flatnonzero((dmap.dist > 0) & (dmap.dist <= cfg.node_k))]
    pair_vecs = []
    for s in ring:
        d = dmap[s]
        if cfg.variant is Variant.NEIGHBOR_ONLY:
            pair_vecs.append(h[s])
        elif cfg.variant is Variant.DIST_ONLY:
            pair_vecs.append(_onehot(cfg, d))
        else:
            side = vertical_geodesic_one_side(g, v, s, dmap)
            pair_vecs.append(pool_vertical(h, side, cfg, distance=d, graph=g))
    pooled = _reduce(np.array(pair_vecs).reshape(len(ring), cfg.pair_dim(width)),
                     cfg.node_reducer, cfg.pair_dim(width))
    return np.concatenate([pooled, h[v]])


def graph_representation(g: Graph, h: np.ndarray, cfg: PoolConfig) -> np.ndarray:
    if g.num_nodes < 1:
        raise ValueError("empty graph")
    reps = np.array([node_representation(g, h, v, cfg) for v in range(g.num_nodes)])
    return _reduce(reps, cfg.graph_reducer, reps.shape[1])


# ------------------------------------------------------------ batched route

@dataclass
class PairPlan:
    """Flat integer description of many pair-wise geodesics."""

    members: np.ndarray
    segments: np.ndarray
    degrees: np.ndarray
    buckets: np.ndarray
    num_pairs: int


@dataclass
class EdgePlan:
    pairs: PairPlan
    u: np.ndarray
    v: np.ndarray


@dataclass
class NodePlan:
    pairs: PairPlan
    pair_target: np.ndarray
    targets: np.ndarray


def build_edge_plan(g: Graph, edges, cfg: PoolConfig, exclude=None,
                    cache: DistanceCache | None = None, ledger=None) -> EdgePlan:
    """Extract geodesics for every query pair.

    ``exclude`` is an optional boolean mask; a flagged pair is extracted with
    its own edge removed (used for training positives).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    exclude = np.zeros(len(edges), bool) if exclude is None else np.asarray(exclude, bool)
    cache = DistanceCache(g, cfg.d_max) if cache is None else cache
    rng = np.random.default_rng(cfg.seed) if cfg.tie_policy == "seeded-random" else None
    members, segs, degs, buckets = [], [], [], np.empty(len(edges), np.int64)
    for i, (u, v) in enumerate(edges):
        m, dg, d = pair_geodesic(g, int(u), int(v), cfg, cache, bool(exclude[i]), rng)
        members.extend(m)
        segs.extend([i] * len(m))
        if cfg.uses_degree:
            degs.extend(dg[w] for w in m)
        buckets[i] = cfg.bucket(d)
        if ledger is not None:
            ledger.geodesic_extraction_count += 1
    plan = PairPlan(np.array(members, np.int64), np.array(segs, np.int64),
                    np.array(degs, float), buckets, len(edges))
    return EdgePlan(plan, edges[:, 0].copy(), edges[:, 1].copy())


def _neighbor_slots(g: Graph, nodes: np.ndarray):
    starts, ends = g.offsets[nodes], g.offsets[nodes + 1]
    lens = ends - starts
    idx = np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens - starts, lens)
    return np.repeat(np.arange(len(nodes)), lens), g.neighbors[idx]


def build_node_plan(g: Graph, targets, cfg: PoolConfig) -> NodePlan:
    """One-sided geodesics from each target to its ``node_k``-hop ring."""
    if cfg.variant is Variant.HORIZONTAL:
        raise ValueError("horizontal geodesics are not defined for node targets")
    targets = np.asarray(targets, dtype=np.int64)
    members, segs, degs, buckets, pair_target = [], [], [], [], []
    n_pairs = 0
    for t_idx, v in enumerate(targets):
        dist = bfs_distances(g, int(v), cfg.d_max).dist
        ring = np.flatnonzero((dist > 0) & (dist <= cfg.node_k))
        k = len(ring)
        buckets.append(dist[ring])
        pair_target.append(np.full(k, t_idx))
        if cfg.variant is Variant.NEIGHBOR_ONLY:
            members.append(ring)
            segs.append(n_pairs + np.arange(k))
        elif cfg.uses_embeddings:
            owner, nb = _neighbor_slots(g, ring)
            keep = dist[nb] == dist[ring][owner] - 1
            owner, nb = owner[keep], nb[keep]
            members.append(nb)
            segs.append(n_pairs + owner)
            if cfg.uses_degree:
                deg = np.zeros(len(nb))
                # only sets with two or more nodes can have internal edges
                sizes = np.bincount(owner, minlength=k)
                for p in np.flatnonzero(sizes > 1):
                    sel = np.flatnonzero(owner == p)
                    d_map = induced_degrees(g, nb[sel])
                    deg[sel] = [d_map[int(w)] for w in nb[sel]]
                degs.append(deg)
        n_pairs += k
    cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
    plan = PairPlan(cat(members, np.int64), cat(segs, np.int64), cat(degs, float),
                    cat(buckets, np.int64), n_pairs)
    return NodePlan(plan, cat(pair_target, np.int64), targets)


def _const_reduce(values: np.ndarray, segments: np.ndarray, n: int, reducer: str) -> np.ndarray:
    out = np.zeros(n)
    if reducer == "max":
        out[:] = -np.inf
        np.maximum.at(out, segments, values)
        out[np.isneginf(out)] = 0.0
        return out
    np.add.at(out, segments, values)
    if reducer == "mean":
        counts = np.bincount(segments, minlength=n)
        out = np.divide(out, counts, out=np.zeros(n), where=counts > 0)
    return out


def pair_block(rec: ComputationRecord, h: Node, plan: PairPlan, cfg: PoolConfig) -> Node:
    dtype = h.value.dtype
    parts = []
    if cfg.uses_embeddings:
        rows = rec.gather(h, plan.members)
        parts.append(rec.segment_reduce(rows, plan.segments, plan.num_pairs, cfg.reducer))
    if cfg.uses_degree:
        col = _const_reduce(plan.degrees, plan.segments, plan.num_pairs, cfg.reducer)
        parts.append(rec.const(col[:, None].astype(dtype)))
    if cfg.uses_distance:
        onehot = np.zeros((plan.num_pairs, cfg.distance_dim), dtype=dtype)
        onehot[np.arange(plan.num_pairs), plan.buckets] = 1.0
        parts.append(rec.const(onehot))
    return parts[0] if len(parts) == 1 else rec.concat(parts)


def edge_block(rec: ComputationRecord, h: Node, plan: EdgePlan, cfg: PoolConfig) -> Node:
    geo = pair_block(rec, h, plan.pairs, cfg)
    return rec.concat([geo, rec.gather(h, plan.u), rec.gather(h, plan.v)])


def node_block(rec: ComputationRecord, h: Node, plan: NodePlan, cfg: PoolConfig) -> Node:
    pairs = pair_block(rec, h, plan.pairs, cfg)
    pooled = rec.segment_reduce(pairs, plan.pair_target, len(plan.targets), cfg.node_reducer)
    return rec.concat([pooled, rec.gather(h, plan.targets)])


def graph_block(rec: ComputationRecord, h: Node, plan: NodePlan, cfg: PoolConfig) -> Node:
    nodes = node_block(rec, h, plan, cfg)
    return rec.segment_reduce(nodes, np.zeros(len(plan.targets), np.int64), 1, cfg.graph_reducer)
