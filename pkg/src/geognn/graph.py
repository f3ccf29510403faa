"""Immutable CSR graph storage and the file formats built on it."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised when an edge-list or collection file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected (or directed) simple graph in compressed sparse row form.

    ``neighbors[offsets[v]:offsets[v + 1]]`` is the sorted neighbor slice of
    ``v``.  Undirected graphs store both directions of every edge.
    """

    num_nodes: int
    offsets: np.ndarray
    neighbors: np.ndarray
    edge_labels: np.ndarray | None = None
    features: np.ndarray | None = None
    undirected: bool = True

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors, self.edge_labels, self.features):
            if arr is not None:
                arr.setflags(write=False)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.diff(self.offsets)
        deg.setflags(write=False)
        return deg

    @property
    def num_edges(self) -> int:
        """Number of stored undirected edges (directed arcs if directed)."""
        n = len(self.neighbors)
        return n // 2 if self.undirected else n

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors_of(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def edge_array(self) -> np.ndarray:
        """All edges as an (m, 2) array; each undirected edge once with u < v."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        pairs = np.stack([src, self.neighbors], axis=1)
        if self.undirected:
            pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        return pairs

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.neighbors))
        adj = sp.csr_matrix((data, self.neighbors, self.offsets),
                            shape=(self.num_nodes, self.num_nodes))
        adj.has_sorted_indices = True
        return adj

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the isomorphic copy where node ``v`` becomes ``perm[v]``."""
        perm = np.asarray(perm)
        edges = self.edge_array()
        feats = None
        if self.features is not None:
            feats = np.empty_like(self.features)
            feats[perm] = self.features
        return build_graph(perm[edges], self.num_nodes, undirected=self.undirected,
                           features=feats)

    def without_edges(self, edges: np.ndarray) -> "Graph":
        """Copy of the graph with the given (undirected) edges removed."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        n = self.num_nodes
        drop = np.concatenate([edges[:, 0] * n + edges[:, 1], edges[:, 1] * n + edges[:, 0]])
        src = np.repeat(np.arange(n), self.degrees)
        keys = src * n + self.neighbors
        keep = ~np.isin(keys, drop)
        counts = np.bincount(src[keep], minlength=n)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        labels = None if self.edge_labels is None else self.edge_labels[keep].copy()
        return Graph(n, offsets, self.neighbors[keep].copy(), labels, self.features,
                     self.undirected)


@dataclass
class GraphCollection:
    graphs: list[Graph]
    labels: list | None = None

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.graphs):
            raise ValueError(f"{len(self.labels)} labels for {len(self.graphs)} graphs")

    def __len__(self):
        return len(self.graphs)


def build_graph(edges, num_nodes: int, undirected: bool = True,
                features: np.ndarray | None = None) -> Graph:
    """Build a canonical graph: self-loops dropped, duplicates merged, slices sorted.

    ``edges`` holds ``(u, v)`` or ``(u, v, label)`` rows.  When a duplicate
    edge carries different labels the first occurrence wins.
    """
    if num_nodes <= 0:
        raise ValueError("num_nodes must be positive")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                     dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("edges must be (u, v) or (u, v, label) rows")
    labelled = arr.shape[1] == 3
    u, v = arr[:, 0], arr[:, 1]
    if len(arr) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= num_nodes):
        raise ValueError(f"edge endpoint out of range for {num_nodes} nodes")
    lab = arr[:, 2] if labelled else None
    keep = u != v
    u, v = u[keep], v[keep]
    if labelled:
        lab = lab[keep]
    if undirected:
        # settle labels per unordered pair first so both directions agree
        a, b = np.minimum(u, v), np.maximum(u, v)
        _, first_pair = np.unique(a * num_nodes + b, return_index=True)
        u, v = a[first_pair], b[first_pair]
        if labelled:
            lab = lab[first_pair]
        u, v = np.concatenate([u, v]), np.concatenate([v, u])
        if labelled:
            lab = np.concatenate([lab, lab])
    keys = u * num_nodes + v
    # np.unique returns first occurrences, sorted by (u, v)
    keys, first = np.unique(keys, return_index=True)
    src, dst = keys // num_nodes, keys % num_nodes
    counts = np.bincount(src, minlength=num_nodes)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    if features is not None:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        if features.shape[0] != num_nodes:
            raise ValueError("feature matrix must have one row per node")
    return Graph(num_nodes, offsets, dst.astype(np.int64),
                 lab[first].copy() if labelled else None, features, undirected)


def bfs_levels(g: Graph, source: int, max_depth: int,
               exclude_edge: tuple[int, int] | None = None) -> np.ndarray:
    """Hop distances from ``source`` up to ``max_depth``; -1 beyond.

    Level-synchronous: each frontier expands through the CSR slices in one
    vectorised gather.  ``exclude_edge`` is treated as absent (both directions).
    """
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    offsets, nbrs = g.offsets, g.neighbors
    for level in range(1, max_depth + 1):
        starts, ends = offsets[frontier], offsets[frontier + 1]
        lens = ends - starts
        total = int(lens.sum())
        if total == 0:
            break
        # flat indices of every neighbor slot of every frontier node
        idx = np.arange(total) - np.repeat(np.cumsum(lens) - lens - starts, lens)
        cand = nbrs[idx]
        if exclude_edge is not None:
            a, b = exclude_edge
            src = np.repeat(frontier, lens)
            cand = cand[~(((src == a) & (cand == b)) | ((src == b) & (cand == a)))]
        cand = cand[dist[cand] < 0]
        if len(cand) == 0:
            break
        cand = np.unique(cand)
        dist[cand] = level
        frontier = cand
    return dist


def k_hop_neighborhood(g: Graph, v: int, k: int) -> set[int]:
    """All nodes other than ``v`` within ``k`` hops of ``v``."""
    if not 0 <= v < g.num_nodes:
        raise ValueError(f"node {v} out of range")
    if k < 0:
        raise ValueError("k must be non-negative")
    dist = bfs_levels(g, v, k)
    return {int(w) for w in np.flatnonzero(dist > 0)}


def induced_degrees(g: Graph, nodes: Iterable[int]) -> dict[int, int]:
    """Degree of each node inside the subgraph induced by ``nodes``."""
    members = {int(w) for w in nodes}
    return {w: sum(1 for x in g.neighbors_of(w) if int(x) in members)
            for w in sorted(members)}


def induced_subgraph(g: Graph, nodes) -> Graph:
    """Subgraph on ``nodes`` (in the given order), relabelled to ``0..len(nodes)-1``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    starts, ends = g.offsets[nodes], g.offsets[nodes + 1]
    lens = ends - starts
    idx = np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens - starts, lens)
    src = np.repeat(np.arange(len(nodes)), lens)
    dst = local[g.neighbors[idx]]
    keep = dst >= 0
    edges = np.stack([src[keep], dst[keep]], axis=1)
    feats = None if g.features is None else g.features[nodes]
    return build_graph(edges, max(len(nodes), 1), g.undirected, feats)


# ---------------------------------------------------------------- file formats

def read_edge_list(path, undirected: bool = True) -> Graph:
    """Parse ``u<TAB>v[<TAB>label]`` lines with an optional ``#nodes=N`` header."""
    num_nodes = None
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.replace(" ", "").startswith("#nodes="):
                    num_nodes = int(line.split("=", 1)[1])
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"{path}:{lineno}: expected 2 or 3 fields")
            try:
                rows.append([int(p) for p in parts])
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
    if any(len(r) == 3 for r in rows) and not all(len(r) == 3 for r in rows):
        rows = [r + [0] if len(r) == 2 else r for r in rows]
    if num_nodes is None:
        if not rows:
            raise GraphFormatError(f"{path}: empty edge list without #nodes header")
        num_nodes = max(max(r[0], r[1]) for r in rows) + 1
    try:
        return build_graph(rows, num_nodes, undirected=undirected)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_edge_list(g))


def format_edge_list(g: Graph) -> str:
    """``#nodes=N`` header then one ``u<TAB>v[<TAB>label]`` line per edge."""
    src = np.repeat(np.arange(g.num_nodes), g.degrees)
    keep = src < g.neighbors if g.undirected else np.ones(len(src), bool)
    cols = [src[keep], g.neighbors[keep]]
    if g.edge_labels is not None:
        cols.append(g.edge_labels[keep])
    lines = [f"#nodes={g.num_nodes}"] + ["\t".join(map(str, row)) for row in zip(*cols)]
    return "\n".join(lines) + "\n"


def read_collection(path) -> GraphCollection:
    """One JSON object per line: ``{"num_nodes": n, "edges": [[u, v], ...], "label": y}``."""
    graphs, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                graphs.append(build_graph(rec.get("edges", []), int(rec["num_nodes"])))
            except (KeyError, ValueError, TypeError) as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            labels.append(rec.get("label"))
    if all(lab is None for lab in labels):
        labels = None
    return GraphCollection(graphs, labels)


def write_collection(coll: GraphCollection, path) -> None:
    with open(path, "w") as fh:
        for i, g in enumerate(coll.graphs):
            rec = {"num_nodes": g.num_nodes, "edges": g.edge_array().tolist()}
            if coll.labels is not None:
                lab = coll.labels[i]
                rec["label"] = lab.tolist() if isinstance(lab, np.ndarray) else lab
            fh.write(json.dumps(rec) + "\n")
