"""Graph families used by the expressiveness harness, the benchmark and the tests."""

from __future__ import annotations

from math import gcd

import numpy as np

from .graph import Graph, build_graph

CSL_SKIPS = (2, 3, 4, 5, 6, 9, 11, 12, 13, 16)


class InfeasibleGraphError(ValueError):
    pass


def cycle_graph(n: int) -> Graph:
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def path_graph(n: int) -> Graph:
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def complete_graph(n: int) -> Graph:
    return build_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def disjoint_union(*graphs: Graph) -> Graph:
    edges, shift = [], 0
    for g in graphs:
        edges.append(g.edge_array() + shift)
        shift += g.num_nodes
    return build_graph(np.concatenate(edges), shift)


def csl_graph(n: int = 41, skip: int = 2) -> Graph:
    """Circular skip-link graph: an ``n``-cycle plus chords ``i -- i+skip``."""
    if not 2 <= skip <= (n - 1) // 2 or gcd(n, skip) != 1:
        raise ValueError(f"invalid skip {skip} for n={n}")
    edges = [(i, (i + 1) % n) for i in range(n)] + [(i, (i + skip) % n) for i in range(n)]
    return build_graph(edges, n)


def shrikhande() -> Graph:
    """Cayley graph on Z4 x Z4 with connection set {±(1,0), ±(0,1), ±(1,1)}."""
    steps = [(1, 0), (3, 0), (0, 1), (0, 3), (1, 1), (3, 3)]
    edges = [(4 * i + j, 4 * ((i + a) % 4) + (j + b) % 4)
             for i in range(4) for j in range(4) for a, b in steps]
    return build_graph(edges, 16)


def rook4x4() -> Graph:
    """4x4 rook's graph: cells adjacent when they share a row or a column."""
    cells = [(i, j) for i in range(4) for j in range(4)]
    edges = [(4 * a + b, 4 * c + d) for (a, b) in cells for (c, d) in cells
             if (a, b) < (c, d) and (a == c or b == d)]
    return build_graph(edges, 16)


def random_regular_graph(n: int, r: int, seed=None, max_tries: int = 10_000) -> Graph:
    """Simple ``r``-regular graph from the pairing model, rejecting loops and multi-edges."""
    if (n * r) % 2 or not 0 <= r < n:
        raise InfeasibleGraphError(f"no simple {r}-regular graph on {n} nodes")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), r)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        lo, hi = pairs.min(axis=1), pairs.max(axis=1)
        if len(np.unique(lo * n + hi)) == len(pairs):
            return build_graph(pairs, n)
    raise InfeasibleGraphError(f"pairing model failed after {max_tries} tries")


def gnm_random_graph(n: int, m: int, seed=None) -> Graph:
    """Uniform simple graph with ``n`` nodes and ``m`` edges."""
    if m > n * (n - 1) // 2:
        raise InfeasibleGraphError("too many edges")
    rng = np.random.default_rng(seed)
    keys = np.zeros(0, np.int64)
    while len(keys) < m:
        u = rng.integers(0, n, size=2 * (m - len(keys)) + 16)
        v = rng.integers(0, n, size=len(u))
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        new = (lo * n + hi)[lo != hi]
        _, first = np.unique(new, return_index=True)
        new = new[np.sort(first)]
        keys = np.concatenate([keys, new[~np.isin(new, keys)]])
    keys = keys[:m]
    return build_graph(np.stack([keys // n, keys % n], axis=1), n)


# ---------------------------------------------------------------- fixtures

def triangle_square() -> Graph:
    """A 3-cycle (nodes 0-2) next to a 4-cycle (nodes 3-6): 1-WL sees one class."""
    return build_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (5, 6), (3, 6)], 7)


def six_cycle_links() -> tuple[Graph, dict[str, int]]:
    """The circular graph where links AB (adjacent) and AC (opposite) look alike to a GNN."""
    return cycle_graph(6), {"A": 0, "B": 1, "C": 3}


def path_context_graph() -> tuple[Graph, dict[str, int]]:
    """Links AB and AC at equal distance whose middle nodes differ.

    ``A-v1-B`` and ``A-v2-C`` with ``v1`` also attached to a triangle; distance
    alone cannot separate AB from AC but the embeddings of v1 and v2 can.
    """
    names = {"A": 0, "v1": 1, "B": 2, "v2": 3, "C": 4, "x1": 5, "x2": 6}
    n = names
    edges = [(n["A"], n["v1"]), (n["v1"], n["B"]), (n["A"], n["v2"]), (n["v2"], n["C"]),
             (n["v1"], n["x1"]), (n["v1"], n["x2"]), (n["x1"], n["x2"])]
    return build_graph(edges, 7), names


def vertical_beats_horizontal() -> tuple[Graph, dict[str, int]]:
    """Four degree-4 hub nodes on a ring, consecutive hubs joined through bridge nodes.

    Hub pairs are bridged by 1, 3, 1, 3 degree-2 nodes, so A-B share one
    bridge node and B-C share three, while a 1-WL GNN gives every hub one
    embedding and every bridge node another.
    """
    names = {"A": 0, "B": 1, "C": 2, "D": 3}
    ring = [(0, 1, 1), (1, 2, 3), (2, 3, 1), (3, 0, 3)]
    edges, nxt = [], 4
    for a, b, mult in ring:
        for _ in range(mult):
            edges += [(a, nxt), (nxt, b)]
            nxt += 1
    return build_graph(edges, nxt), names


NAMED_GRAPHS = {
    "shrikhande": shrikhande,
    "rook": rook4x4,
    "rook4x4": rook4x4,
    "triangle-square": triangle_square,
    "six-cycle": lambda: cycle_graph(6),
    "path-context": lambda: path_context_graph()[0],
    "vertical-fixture": lambda: vertical_beats_horizontal()[0],
}
