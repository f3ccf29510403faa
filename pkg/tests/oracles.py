"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

INF = 10**9


def adjacency_sets(edges, n):
    adj = [set() for _ in range(n)]
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    return adj


def floyd_warshall(adj):
    n = len(adj)
    d = [[0 if i == j else (1 if j in adj[i] else INF) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def clipped(d, d_max):
    return [[x if x <= d_max else -1 for x in row] for row in d]


def all_shortest_paths(adj, u, v):
    """Every shortest u-v path by depth-first enumeration of simple paths."""
    best, paths = [INF], []

    def dfs(node, path):
        if len(path) - 1 > best[0]:
            return
        if node == v:
            if len(path) - 1 < best[0]:
                best[0], paths[:] = len(path) - 1, []
            paths.append(list(path))
            return
        for w in sorted(adj[node]):
            if w not in path:
                path.append(w)
                dfs(w, path)
                path.pop()

    dfs(u, [u])
    return paths


def random_edges(rng, n, p):
    return [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]


def naive_wl(adj, rounds=None):
    """Colour refinement with colours named by nested tuples (no hashing tricks)."""
    n = len(adj)
    colors = [()] * n
    for _ in range(rounds or n):
        new = [(colors[v], tuple(sorted(colors[w] for w in adj[v]))) for v in range(n)]
        if len(set(new)) == len(set(colors)):
            break
        colors = new
    return colors


def same_partition(a, b):
    ka, kb = {}, {}
    for x, y in zip(a, b):
        if ka.setdefault(x, y) != y or kb.setdefault(y, x) != x:
            return False
    return True


def edge_config_bruteforce(adj, v, d_max):
    d = floyd_warshall(adj)[v]
    out = []
    for k in range(d_max):
        ring = [w for w in range(len(adj)) if d[w] == k + 1]
        counts = Counter(sum(1 for x in adj[w] if d[x] == k) for w in ring)
        top = max(counts) if counts else 0
        out.append(tuple(counts.get(i, 0) for i in range(1, top + 1)))
    return tuple(out)


def dense_gnn(adj_matrix, x, values, kind, depth):
    """Dense-matrix forward pass; mirrors the layer definitions with plain numpy."""
    h = x
    n = len(adj_matrix)
    for i in range(depth):
        if kind == "gcn":
            a = adj_matrix + np.eye(n)
            dinv = np.diag(1 / np.sqrt(a.sum(1)))
            h = dinv @ a @ dinv @ h @ values[f"gnn.{i}.W"] + values[f"gnn.{i}.b"]
        else:
            c = (1 + values[f"gnn.{i}.eps"]) * h + adj_matrix @ h
            mid = np.maximum(c @ values[f"gnn.{i}.W1"] + values[f"gnn.{i}.b1"], 0)
            h = mid @ values[f"gnn.{i}.W2"] + values[f"gnn.{i}.b2"]
        if i < depth - 1:
            h = np.maximum(h, 0)
    return h


def auc_pairs(pos, neg):
    """AUC by explicit pair counting."""
    tot = 0.0
    for p in pos:
        for q in neg:
            tot += 1.0 if p > q else (0.5 if p == q else 0.0)
    return tot / (len(pos) * len(neg))


def logistic_fit_separable(x_pos, x_neg, steps=2000, lr=1.0):
    """Closed-form-ish logistic fit by plain gradient descent on two points."""
    w = np.zeros(len(x_pos))
    b = 0.0
    for _ in range(steps):
        zp, zn = x_pos @ w + b, x_neg @ w + b
        gp, gn = 1 / (1 + np.exp(-zp)) - 1, 1 / (1 + np.exp(-zn))
        w -= lr * (gp * x_pos + gn * x_neg) / 2
        b -= lr * (gp + gn) / 2
    zp, zn = x_pos @ w + b, x_neg @ w + b
    return (np.log1p(np.exp(-zp)) + np.log1p(np.exp(zn))) / 2
