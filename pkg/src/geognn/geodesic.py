"""Cutoff-bounded shortest paths and horizontal/vertical geodesic extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .graph import Graph, bfs_levels, induced_degrees

UNREACHABLE = -1


@dataclass(frozen=True, eq=False)
class DistanceMap:
    source: int
    d_max: int
    dist: np.ndarray

    def __getitem__(self, w) -> int:
        return int(self.dist[w])

    def reachable(self, w) -> bool:
        return self.dist[w] != UNREACHABLE


@dataclass(frozen=True)
class HorizontalGeodesic:
    path: tuple[int, ...]

    @property
    def distance(self) -> int:
        return len(self.path) - 1


@dataclass(frozen=True)
class VerticalGeodesic:
    """Endpoint-adjacent nodes lying on any shortest ``u``-``v`` path."""

    near_u: frozenset[int]
    near_v: frozenset[int]
    distance: int
    degrees: dict[int, int]

    @property
    def nodes(self) -> list[int]:
        return sorted(self.near_u | self.near_v)


def bfs_distances(g: Graph, source: int, d_max: int,
                  exclude_edge: tuple[int, int] | None = None) -> DistanceMap:
    """Exact hop distances from ``source`` up to ``d_max``, ``UNREACHABLE`` beyond.

    ``exclude_edge`` removes one edge for the duration of the search, which is
    how training positives are kept from seeing their own label.
    """
    if not 0 <= source < g.num_nodes:
        raise ValueError(f"source {source} out of range")
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    dist = bfs_levels(g, source, d_max, exclude_edge)
    dist.setflags(write=False)
    return DistanceMap(source, d_max, dist)


def horizontal_geodesic(g: Graph, u: int, v: int, dmap_v: DistanceMap,
                        policy: Literal["lexicographic", "seeded-random"] = "lexicographic",
                        rng: np.random.Generator | None = None) -> HorizontalGeodesic | None:
    """Walk from ``u`` down the distance field of ``v``; ``None`` if unreachable.

    Ties go to the smallest node id, or to a uniformly random candidate drawn
    from ``rng`` under the seeded-random policy.
    """
    if dmap_v.source != v:
        raise ValueError("dmap_v must be rooted at v")
    if not dmap_v.reachable(u):
        return None
    if policy == "seeded-random" and rng is None:
        raise ValueError("seeded-random policy needs an rng")
    dist = dmap_v.dist
    path = [u]
    cur = u
    while cur != v:
        nbrs = g.neighbors_of(cur)
        cand = nbrs[dist[nbrs] == dist[cur] - 1]
        if len(cand) == 0:
            return None
        if policy == "lexicographic":
            cur = int(cand[0])
        else:
            cur = int(cand[rng.integers(len(cand))])
        path.append(cur)
    return HorizontalGeodesic(tuple(path))


def vertical_geodesic(g: Graph, u: int, v: int, dmap_u: DistanceMap,
                      dmap_v: DistanceMap) -> VerticalGeodesic | None:
    """Neighbors of ``u`` and of ``v`` lying on some shortest path between them.

    ``degrees`` are taken in the subgraph induced by both sides jointly,
    without the query link ``u``-``v`` itself.
    Returns ``None`` when ``d(u, v)`` exceeds the cutoff.  For ``u == v`` the
    geodesic is empty with distance 0.
    """
    if dmap_u.d_max != dmap_v.d_max:
        raise ValueError("distance maps must share d_max")
    d = dmap_u[v]
    if d == UNREACHABLE:
        return None
    if d == 0:
        return VerticalGeodesic(frozenset(), frozenset(), 0, {})
    du, dv = dmap_u.dist, dmap_v.dist

    def side(i):
        nbrs = g.neighbors_of(i)
        ok = (du[nbrs] >= 0) & (dv[nbrs] >= 0) & (du[nbrs] + dv[nbrs] == d)
        return frozenset(int(w) for w in nbrs[ok])

    near_u, near_v = side(u), side(v)
    degrees = induced_degrees(g, near_u | near_v)
    if d == 1:
        # W = {u, v}; the query link itself is not part of the geodesic subgraph
        degrees = {u: 0, v: 0}
    return VerticalGeodesic(near_u, near_v, d, degrees)


def vertical_geodesic_one_side(g: Graph, v: int, s: int, dmap_v: DistanceMap) -> set[int]:
    """Neighbors of ``s`` one step closer to ``v``: the geodesic nodes next to ``s``."""
    ds = dmap_v[s]
    if ds == UNREACHABLE:
        raise ValueError(f"node {s} is beyond d_max={dmap_v.d_max} from {v}")
    nbrs = g.neighbors_of(s)
    return {int(w) for w in nbrs[dmap_v.dist[nbrs] == ds - 1]} if ds > 0 else set()
