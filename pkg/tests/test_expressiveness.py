import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geognn.expressiveness import (canonical_signature, distinguish_pair, edge_configurations,
                                   node_signature, regular_dmax, wl_distinguishes, wl_refine)
from geognn.generators import (CSL_SKIPS, InfeasibleGraphError, csl_graph, cycle_graph,
                               disjoint_union, path_graph, random_regular_graph, rook4x4,
                               shrikhande, triangle_square)
from geognn.graph import build_graph

import oracles


def to_nx(g):
    out = nx.Graph()
    out.add_nodes_from(range(g.num_nodes))
    out.add_edges_from(g.edge_array().tolist())
    return out


def random_tree(seed, n):
    rng = np.random.default_rng(seed)
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    return build_graph(edges, n), oracles.adjacency_sets(edges, n)


# ------------------------------------------------------------------ 1-WL

def test_wl_triangle_square_single_class():
    part = wl_refine(triangle_square())
    assert part.num_classes == 1
    assert part.rounds_to_stabilize == 1


def test_wl_path_graph():
    part = wl_refine(path_graph(5))
    assert part.classes() == [[0, 4], [1, 3], [2]]


@pytest.mark.parametrize("seed", range(25))
def test_wl_matches_naive_oracle_on_trees(seed):
    n = 3 + seed % 12
    g, adj = random_tree(seed, n)
    assert oracles.same_partition(wl_refine(g).colors, oracles.naive_wl(adj))


@pytest.mark.parametrize("seed", range(15))
def test_wl_matches_naive_oracle_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 14))
    edges = oracles.random_edges(rng, n, 0.3)
    g = build_graph(edges, n)
    assert oracles.same_partition(wl_refine(g).colors,
                                  oracles.naive_wl(oracles.adjacency_sets(edges, n)))


@pytest.mark.parametrize("seed", range(10))
def test_wl_distinguishes_agrees_with_networkx_hash(seed):
    g1 = random_tree(seed, 9)[0]
    g2 = random_tree(seed + 100, 9)[0]
    nx_differs = (nx.weisfeiler_lehman_graph_hash(to_nx(g1), iterations=9)
                  != nx.weisfeiler_lehman_graph_hash(to_nx(g2), iterations=9))
    assert wl_distinguishes(g1, g2) == nx_differs


def test_wl_canonical_under_relabel():
    g = random_tree(3, 12)[0]
    perm = np.random.default_rng(0).permutation(12)
    a = wl_refine(g).colors
    b = wl_refine(g.relabel(perm)).colors
    assert [b[perm[v]] for v in range(12)] == list(a)


def test_wl_fails_on_regular_pairs():
    assert not wl_distinguishes(shrikhande(), rook4x4())
    assert not wl_distinguishes(cycle_graph(6), disjoint_union(cycle_graph(3), cycle_graph(3)))


def test_wl_bad_rounds():
    with pytest.raises(ValueError):
        wl_refine(cycle_graph(3), max_rounds=0)


# ------------------------------------------------------------------ edge configurations

def test_six_cycle_configuration():
    conf = edge_configurations(cycle_graph(6), 0, 3)
    assert conf.layers == ((2,), (2,), (0, 1))


@pytest.mark.parametrize("seed", range(30))
def test_configuration_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    edges = oracles.random_edges(rng, n, 0.35)
    g, adj = build_graph(edges, n), oracles.adjacency_sets(edges, n)
    for v in range(n):
        assert edge_configurations(g, v, 4).layers == oracles.edge_config_bruteforce(adj, v, 4)


@given(st.integers(0, 5000))
@settings(max_examples=40, deadline=None)
def test_configuration_double_counting(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 14))
    edges = oracles.random_edges(rng, n, 0.3)
    g = build_graph(edges, n)
    d = oracles.floyd_warshall(oracles.adjacency_sets(edges, n))
    v = seed % n
    conf = edge_configurations(g, v, 3)
    for k, layer in enumerate(conf.layers):
        crossing = sum(1 for a, b in edges if {d[v][a], d[v][b]} == {k, k + 1})
        assert sum((i + 1) * c for i, c in enumerate(layer)) == crossing
        assert sum(layer) == sum(1 for w in range(n) if d[v][w] == k + 1)


def test_configuration_bad_cutoff():
    with pytest.raises(ValueError):
        edge_configurations(cycle_graph(4), 0, 0)


# ------------------------------------------------------------------ signatures

@pytest.mark.parametrize("seed", range(15))
def test_vert_signature_is_edge_configuration(seed):
    g = random_regular_graph(20, 3, seed=seed)
    for v in range(0, 20, 3):
        sig = node_signature(g, v, 3, "vert")
        conf = edge_configurations(g, v, 3)
        for k in range(3):
            assert dict(sig[k]) == {i + 1: c for i, c in enumerate(conf.layers[k]) if c}


@pytest.mark.parametrize("variant", ["vert", "vertdeg", "hor"])
def test_signature_relabel_invariant(variant):
    g = random_regular_graph(24, 3, seed=11)
    perm = np.random.default_rng(2).permutation(24)
    a = canonical_signature(g, 4, variant)
    b = canonical_signature(g.relabel(perm), 4, variant)
    assert a == b and a.digest() == b.digest()


def test_signature_bad_variant():
    with pytest.raises(ValueError):
        node_signature(cycle_graph(4), 0, 2, "diag")


def test_shrikhande_rook():
    sh, rk = shrikhande(), rook4x4()
    assert not distinguish_pair(sh, rk, 2, "vert")
    assert distinguish_pair(sh, rk, 2, "vertdeg")
    assert canonical_signature(sh, 2, "vertdeg").num_distinct_nodes == 1


def test_horizontal_signature_is_layer_sizes():
    # on any graph the horizontal bin count only sees how many nodes sit at each distance
    assert not distinguish_pair(shrikhande(), rook4x4(), 3, "hor")


def test_csl_family_separated():
    graphs = [csl_graph(41, s) for s in CSL_SKIPS]
    digests = {canonical_signature(g, 4, "vert").digest() for g in graphs}
    assert len(digests) == len(CSL_SKIPS)
    assert not wl_distinguishes(graphs[0], graphs[1])


def test_two_triangles_vs_hexagon():
    assert distinguish_pair(cycle_graph(6), disjoint_union(cycle_graph(3), cycle_graph(3)), 2)
    assert not distinguish_pair(cycle_graph(6), disjoint_union(cycle_graph(3), cycle_graph(3)), 2, "wl")


# ------------------------------------------------------------------ regular graph generator

@pytest.mark.parametrize("n,r", [(10, 3), (50, 3), (30, 4), (12, 5)])
def test_random_regular_degrees(n, r):
    g = random_regular_graph(n, r, seed=n)
    assert np.all(g.degrees == r)
    assert nx.number_of_selfloops(to_nx(g)) == 0
    assert g.num_edges == n * r // 2


def test_random_regular_k4_unique():
    g = random_regular_graph(4, 3, seed=0)
    assert g.num_edges == 6


@pytest.mark.parametrize("n,r", [(5, 3), (4, 4), (3, -1)])
def test_random_regular_infeasible(n, r):
    with pytest.raises(InfeasibleGraphError):
        random_regular_graph(n, r)


def test_random_regular_seeded():
    a = random_regular_graph(30, 3, seed=9).edge_array()
    b = random_regular_graph(30, 3, seed=9).edge_array()
    assert np.array_equal(a, b)


@pytest.mark.parametrize("make", [shrikhande, rook4x4])
def test_srg_parameters(make):
    g = make()
    adj = oracles.adjacency_sets(g.edge_array().tolist(), 16)
    assert all(len(adj[v]) == 6 for v in range(16))
    for a in range(16):
        for b in range(a + 1, 16):
            common = len(adj[a] & adj[b])
            assert common == 2
    assert not nx.is_isomorphic(to_nx(shrikhande()), to_nx(rook4x4()))


# ------------------------------------------------------------------ cutoff and pair decisions

@pytest.mark.parametrize("n,r,eps,expected", [(50, 3, 0.1, 4), (1000, 3, 0.1, 7), (100, 4, 0.1, 3)])
def test_regular_dmax(n, r, eps, expected):
    assert regular_dmax(n, r, eps) == expected


def test_regular_dmax_needs_r_above_two():
    with pytest.raises(ValueError):
        regular_dmax(50, 2)


def test_distinguish_pair_modes():
    g1 = random_regular_graph(50, 3, seed=1)
    g2 = random_regular_graph(50, 3, seed=2)
    assert not distinguish_pair(g1, g2, 4, "wl")
    assert distinguish_pair(g1, g2, 4, "vert")
    assert not distinguish_pair(g1, g1.relabel(np.arange(50)[::-1]), 4, "vert")
