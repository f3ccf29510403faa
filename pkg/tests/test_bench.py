import numpy as np
import pytest

from geognn.bench import (BENCH_HEADER, BaselineConfig, RunLedger, disjoint_queries,
                          drnl_like_label, parallel_edge_plan, run_benchmark)
from geognn.generators import cycle_graph, gnm_random_graph, path_graph, six_cycle_links
from geognn.graph import build_graph
from geognn.pooling import PoolConfig, build_edge_plan

import oracles


def test_drnl_endpoint_labels_and_target_edge():
    g = cycle_graph(6)
    sub, labels, nodes = drnl_like_label(g, 0, 1, 2)
    assert nodes[:2].tolist() == [0, 1]
    assert labels[:2].tolist() == [[0, 1], [1, 0]]
    assert not sub.has_edge(0, 1)
    assert sub.features.shape == (len(nodes), 16)
    assert np.all(sub.features.sum(axis=1) == 1)


@pytest.mark.parametrize("seed", range(15))
@pytest.mark.parametrize("radius", [1, 2, 3])
def test_drnl_labels_match_distances(seed, radius):
    g = gnm_random_graph(25, 40, seed=seed)
    u, v = (int(x) for x in g.edge_array()[seed % g.num_edges])
    edges = [tuple(e) for e in g.edge_array().tolist() if set(e) != {u, v}]
    d = oracles.floyd_warshall(oracles.adjacency_sets(edges, 25))
    sub, labels, nodes = drnl_like_label(g, u, v, radius)
    expected = {w for w in range(25) if min(d[u][w], d[v][w]) <= radius}
    assert set(nodes.tolist()) == expected
    for (a, b), w in zip(labels[2:].tolist(), nodes[2:].tolist()):
        assert a == (d[u][w] if d[u][w] <= radius else radius + 1)
        assert b == (d[v][w] if d[v][w] <= radius else radius + 1)
    # induced structure preserved apart from the target link
    for i in range(len(nodes)):
        for j in range(len(nodes)):
            want = g.has_edge(nodes[i], nodes[j]) and {i, j} != {0, 1}
            assert sub.has_edge(i, j) == want


def test_drnl_labels_separate_six_cycle_links():
    g, n = six_cycle_links()
    _, ab, _ = drnl_like_label(g, n["A"], n["B"], 3)
    _, ac, _ = drnl_like_label(g, n["A"], n["C"], 3)
    assert sorted(map(tuple, ab.tolist())) != sorted(map(tuple, ac.tolist()))


def test_geodesic_plans_separate_six_cycle_links():
    g, n = six_cycle_links()
    cfg = PoolConfig(d_max=3)
    plan = build_edge_plan(g, [(n["A"], n["B"]), (n["A"], n["C"])], cfg)
    assert plan.pairs.buckets.tolist() == [1, 3]


def test_baseline_config():
    assert BaselineConfig(2).label_dim == 16
    with pytest.raises(ValueError):
        BaselineConfig(0)
    with pytest.raises(ValueError):
        drnl_like_label(path_graph(3), 0, 1, 0)


def test_ledger_csv_row():
    led = RunLedger("gdgnn", 5, 1, 5, {"geodesic": 0.5, "gnn": 0.25})
    assert led.total_seconds == 0.75
    assert led.csv_row() == "gdgnn,5,1,5,geodesic=0.5000;gnn=0.2500,0.7500"
    assert len(BENCH_HEADER.split(",")) == len(led.csv_row().split(","))


def test_ledger_phase_accumulates():
    led = RunLedger()
    for _ in range(3):
        with led.phase("a"):
            pass
    assert list(led.seconds) == ["a"] and led.seconds["a"] >= 0


@pytest.mark.parametrize("k", [1, 10])
def test_disjoint_queries(k):
    g = gnm_random_graph(50, 80, seed=0)
    q = disjoint_queries(g, k, seed=1)
    assert len(q) == k and len(np.unique(q)) == 2 * k


def test_disjoint_queries_pad_with_non_edges_and_fail():
    g = build_graph([(0, 1)], 6)
    q = disjoint_queries(g, 3)
    assert len(np.unique(q)) == 6
    with pytest.raises(ValueError):
        disjoint_queries(g, 4)


@pytest.mark.parametrize("k", [1, 40])
def test_forward_counts(k):
    g = gnm_random_graph(300, 600, seed=0)
    q = disjoint_queries(g, k)
    led_g, s_g = run_benchmark(g, q, "gdgnn", layers=2, hidden=8)
    led_b, s_b = run_benchmark(g, q, "subgraph-baseline", layers=2, hidden=8)
    assert led_g.gnn_forward_count == 1 and led_b.gnn_forward_count == k
    assert led_g.geodesic_extraction_count == led_b.geodesic_extraction_count == k
    assert s_g.shape == s_b.shape == (k,)
    assert np.all(np.isfinite(s_g)) and np.all(np.isfinite(s_b))


def test_bench_errors():
    g = cycle_graph(10)
    with pytest.raises(ValueError):
        run_benchmark(g, [(0, 1)], "seal")
    with pytest.raises(ValueError):
        run_benchmark(g, np.zeros((0, 2)))


def test_parallel_plan_matches_serial():
    g = gnm_random_graph(200, 500, seed=3)
    q = disjoint_queries(g, 60)
    cfg = PoolConfig(variant="vertdeg", d_max=3)
    a = parallel_edge_plan(g, q, cfg, threads=1)
    b = parallel_edge_plan(g, q, cfg, threads=4)
    for field in ("members", "segments", "degrees", "buckets"):
        assert np.array_equal(getattr(a.pairs, field), getattr(b.pairs, field))
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)


def test_bench_scores_deterministic():
    g = gnm_random_graph(100, 200, seed=0)
    q = disjoint_queries(g, 10)
    assert np.array_equal(run_benchmark(g, q, seed=2)[1], run_benchmark(g, q, seed=2)[1])
