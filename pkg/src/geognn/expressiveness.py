"""Training-free distinguishing machinery: 1-WL, edge configurations, bin-count signatures."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from math import ceil, log

import numpy as np

from .geodesic import bfs_distances
from .graph import Graph, induced_degrees

SIGNATURE_VARIANTS = ("vert", "vertdeg", "hor")


@dataclass(frozen=True)
class ColorPartition:
    colors: tuple[int, ...]
    rounds_to_stabilize: int

    @property
    def num_classes(self) -> int:
        return len(set(self.colors))

    def classes(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for v, c in enumerate(self.colors):
            out.setdefault(c, []).append(v)
        return [out[c] for c in sorted(out)]


def wl_refine(g: Graph, max_rounds: int | None = None, initial=None) -> ColorPartition:
    """1-WL colour refinement with canonical colour ids.

    New colours are ranks of the sorted ``(own colour, sorted neighbor
    colours)`` signatures, so isomorphic inputs get identical colour arrays up
    to the node permutation.
    """
    n = g.num_nodes
    max_rounds = n if max_rounds is None else max_rounds
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    colors = [0] * n if initial is None else _canon(list(initial))
    rounds = 0
    for _ in range(max_rounds):
        sigs = [(colors[v], tuple(sorted(colors[int(w)] for w in g.neighbors_of(v))))
                for v in range(n)]
        new = _canon(sigs)
        rounds += 1
        if len(set(new)) == len(set(colors)):
            colors = new
            break
        colors = new
    return ColorPartition(tuple(colors), rounds)


def _canon(keys) -> list[int]:
    rank = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [rank[k] for k in keys]


def wl_distinguishes(g1: Graph, g2: Graph) -> bool:
    """Run 1-WL on the disjoint union and compare per-graph colour histograms."""
    from .generators import disjoint_union
    part = wl_refine(disjoint_union(g1, g2))
    c1 = Counter(part.colors[:g1.num_nodes])
    c2 = Counter(part.colors[g1.num_nodes:])
    return c1 != c2


@dataclass(frozen=True)
class EdgeConfiguration:
    """``layers[k][i-1]`` = nodes at distance k+1 with exactly i edges into distance k."""

    layers: tuple[tuple[int, ...], ...]


def edge_configurations(g: Graph, v: int, d_max: int) -> EdgeConfiguration:
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    dist = bfs_distances(g, v, d_max).dist
    layers = []
    for k in range(d_max):
        ring = np.flatnonzero(dist == k + 1)
        counts = [int(np.sum(dist[g.neighbors_of(w)] == k)) for w in ring]
        hist = np.bincount(counts)[1:] if counts else np.zeros(0, int)
        layers.append(tuple(int(c) for c in hist))
    return EdgeConfiguration(tuple(layers))


@dataclass(frozen=True)
class CanonicalSignature:
    """Sorted multiset of per-node distance-sorted bin counts."""

    nodes: tuple

    def digest(self) -> str:
        return hashlib.sha256(repr(self.nodes).encode()).hexdigest()

    @property
    def num_distinct_nodes(self) -> int:
        return len(set(self.nodes))


def node_signature(g: Graph, v: int, d_max: int, variant: str = "vert") -> tuple:
    """Distance-sorted bin count over the one-sided geodesics of ``v``.

    With unit embeddings and sum pooling the pair vector of ``(v, s)`` is the
    size of the geodesic set next to ``s`` plus ``d(v, s)``; this groups those
    sizes by distance and counts them.  ``vertdeg`` also records the sorted
    induced-degree multiset of each set, ``hor`` only the path length.
    """
    variant = variant.lower()
    if variant not in SIGNATURE_VARIANTS:
        raise ValueError(f"unknown signature variant {variant!r}")
    dist = bfs_distances(g, v, d_max).dist
    sig = []
    for k in range(1, d_max + 1):
        bins = Counter()
        for s in np.flatnonzero(dist == k):
            if variant == "hor":
                bins[1] += 1
                continue
            nbrs = g.neighbors_of(s)
            side = nbrs[dist[nbrs] == k - 1]
            if variant == "vert":
                bins[len(side)] += 1
            else:
                degs = induced_degrees(g, side)
                bins[(len(side), tuple(sorted(degs.values())))] += 1
        sig.append(tuple(sorted(bins.items())))
    return tuple(sig)


def canonical_signature(g: Graph, d_max: int, variant: str = "vert") -> CanonicalSignature:
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    return CanonicalSignature(tuple(sorted(node_signature(g, v, d_max, variant)
                                           for v in range(g.num_nodes))))


def distinguish_pair(g1: Graph, g2: Graph, d_max: int, variant: str = "vert") -> bool:
    """True iff the two graphs get different signatures (``wl`` runs plain 1-WL)."""
    if variant.lower() == "wl":
        return wl_distinguishes(g1, g2)
    return canonical_signature(g1, d_max, variant) != canonical_signature(g2, d_max, variant)


def regular_dmax(n: int, r: int, eps: float = 0.1) -> int:
    """Cutoff ``ceil((1/2 + eps) log n / log(r - 1 - eps))`` for n-node r-regular graphs."""
    if r - 1 - eps <= 1:
        raise ValueError("need r - 1 - eps > 1")
    return ceil((0.5 + eps) * log(n) / log(r - 1 - eps))
