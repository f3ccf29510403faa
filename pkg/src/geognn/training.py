"""End-to-end training and evaluation for link, node and graph targets."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import ComputationRecord
from .config import TrainConfig
from .gnn import ModelParams, add_mlp_head, apply_mlp_head, gnn_forward, init_params
from .graph import Graph, GraphCollection
from .metrics import Metrics, accuracy, average_precision, hits_at_k, roc_auc
from .pooling import (DistanceCache, EdgePlan, NodePlan, PairPlan, PoolConfig,
                      build_edge_plan, build_node_plan, edge_block, graph_block, node_block)

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


# ---------------------------------------------------------------- data prep

@dataclass
class LinkSplit:
    train_graph: Graph
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray


def split_links(g: Graph, ratios=(0.85, 0.05, 0.10), seed=0) -> LinkSplit:
    """Random train/valid/test edge split; held-out edges leave the message-passing graph."""
    ratios = np.asarray(ratios, float)
    if len(ratios) != 3 or abs(ratios.sum() - 1) > 1e-9 or np.any(ratios < 0):
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    edges = g.edge_array()
    m = len(edges)
    n_valid, n_test = int(round(m * ratios[1])), int(round(m * ratios[2]))
    n_train = m - n_valid - n_test
    if n_train < 1 or (ratios[1] > 0 and n_valid < 1) or (ratios[2] > 0 and n_test < 1):
        raise ValueError(f"graph with {m} edges is too small to split at {ratios.tolist()}")
    perm = np.random.default_rng(seed).permutation(m)
    train = edges[np.sort(perm[:n_train])]
    valid = edges[np.sort(perm[n_train:n_train + n_valid])]
    test = edges[np.sort(perm[n_train + n_valid:])]
    held = np.concatenate([valid, test])
    return LinkSplit(g.without_edges(held), train, valid, test)


def sample_negatives(g: Graph, positives, ratio: int = 1, seed=0, exclude=None,
                     mode: str = "corrupt") -> np.ndarray:
    """``ratio`` non-edges per positive, distinct and disjoint from ``g`` and ``exclude``.

    ``mode="corrupt"`` keeps one endpoint of each positive and redraws the
    other; ``mode="uniform"`` draws both endpoints uniformly.  Falls back to
    enumerating every non-edge when random draws keep colliding (dense
    graphs); raises if the graph has too few non-edges.
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    if mode not in ("corrupt", "uniform"):
        raise ValueError(f"unknown negative sampling mode {mode!r}")
    rng = np.random.default_rng(seed)
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    n = g.num_nodes
    want = len(pos) * ratio
    src = np.repeat(np.arange(n), g.degrees)
    taken = set((np.minimum(src, g.neighbors) * n + np.maximum(src, g.neighbors)).tolist())
    if exclude is not None:
        ex = np.asarray(exclude, dtype=np.int64).reshape(-1, 2)
        taken.update((ex.min(axis=1) * n + ex.max(axis=1)).tolist())
    chosen: dict[int, None] = {}
    anchors = np.repeat(pos, ratio, axis=0)
    for _ in range(20):
        if len(chosen) >= want:
            break
        keep_first = rng.random(len(anchors)) < 0.5
        fixed = np.where(keep_first, anchors[:, 0], anchors[:, 1])
        if mode == "uniform":
            fixed = rng.integers(0, n, size=len(anchors))
        other = rng.integers(0, n, size=len(anchors))
        keys = np.minimum(fixed, other) * n + np.maximum(fixed, other)
        for key, a, b in zip(keys.tolist(), fixed.tolist(), other.tolist()):
            if a != b and key not in taken and key not in chosen:
                chosen[key] = None
                if len(chosen) >= want:
                    break
    if len(chosen) < want:
        iu = np.triu_indices(n, k=1)
        all_keys = iu[0] * n + iu[1]
        pool = [k for k in all_keys.tolist() if k not in taken and k not in chosen]
        need = want - len(chosen)
        if len(pool) < need:
            raise ValueError(f"only {len(pool) + len(chosen)} non-edges available, {want} requested")
        for k in rng.choice(len(pool), size=need, replace=False):
            chosen[pool[k]] = None
    keys = np.fromiter(chosen, dtype=np.int64, count=len(chosen))[:want]
    return np.stack([keys // n, keys % n], axis=1)


def kfold_indices(n: int, k: int, seed=0) -> list[tuple[np.ndarray, np.ndarray]]:
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    return [(np.sort(np.concatenate(folds[:i] + folds[i + 1:])), np.sort(folds[i]))
            for i in range(k)]


# ---------------------------------------------------------------- model

def input_features(g: Graph, degree_feature: bool, dtype=np.float64) -> np.ndarray:
    """Node features, or ones plus ``log(1 + degree)`` for structure-only graphs."""
    if g.features is not None:
        return g.features.astype(dtype)
    cols = [np.ones(g.num_nodes)]
    if degree_feature:
        cols.append(np.log1p(g.degrees.astype(float)))
    return np.column_stack(cols).astype(dtype)


@dataclass
class GeodesicModel:
    params: ModelParams
    pool: PoolConfig
    task: str
    degree_feature: bool = True

    def embed(self, g: Graph, record: ComputationRecord | None = None, ledger=None):
        x = input_features(g, self.degree_feature, self._dtype)
        _, rec = gnn_forward(g, x, self.params, record, ledger)
        return rec.output, rec

    @property
    def _dtype(self):
        return next(iter(self.params.values.values())).dtype

    def link_logits(self, rec, h, plan: EdgePlan):
        return apply_mlp_head(rec, self.params, edge_block(rec, h, plan, self.pool))

    def node_logits(self, rec, h, plan: NodePlan):
        return apply_mlp_head(rec, self.params, node_block(rec, h, plan, self.pool))

    def score_links(self, g: Graph, pairs=None, plan: EdgePlan | None = None,
                    ledger=None) -> np.ndarray:
        if plan is None:
            plan = build_edge_plan(g, pairs, self.pool, ledger=ledger)
        h, rec = self.embed(g, ledger=ledger)
        return self.link_logits(rec, h, plan).value.ravel()

    def predict_nodes(self, g: Graph, nodes=None, plan: NodePlan | None = None) -> np.ndarray:
        if plan is None:
            plan = build_node_plan(g, nodes, self.pool)
        h, rec = self.embed(g)
        return self.node_logits(rec, h, plan).value.argmax(axis=1)

    def graph_logits(self, rec, graphs, plans):
        rows = []
        for g, plan in zip(graphs, plans):
            h, _ = self.embed(g, rec)
            rows.append(graph_block(rec, h, plan, self.pool))
        return apply_mlp_head(rec, self.params, rec.vstack(rows))

    def predict_graphs(self, graphs, plans=None) -> np.ndarray:
        plans = plans or [build_node_plan(g, np.arange(g.num_nodes), self.pool) for g in graphs]
        return self.graph_logits(ComputationRecord(), graphs, plans).value.argmax(axis=1)


def build_model(cfg: TrainConfig, in_dim: int, out_dim: int, rng) -> GeodesicModel:
    pool = cfg.pool_config()
    params = init_params(cfg.kind, in_dim, cfg.hidden, cfg.layers, rng)
    head_in = pool.edge_dim(cfg.hidden) if cfg.task == "link" else pool.node_dim(cfg.hidden)
    add_mlp_head(params, head_in, cfg.hidden, out_dim, rng)
    return GeodesicModel(params, pool, cfg.task, cfg.degree_feature)


class Adam:
    def __init__(self, params: ModelParams, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params, self.lr, self.betas, self.eps = params, lr, betas, eps
        self.m = {k: np.zeros_like(v) for k, v in params.values.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.values.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            self.params.values[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _check_finite(loss: float, epoch: int, step: int) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss {loss} at epoch {epoch}, step {step}; "
                                    "lower the learning rate")


# ---------------------------------------------------------------- plan slicing

def _subset_pairs(plan: PairPlan, idx: np.ndarray) -> PairPlan:
    remap = np.full(plan.num_pairs, -1, np.int64)
    remap[idx] = np.arange(len(idx))
    keep = remap[plan.segments] >= 0
    degs = plan.degrees[keep] if len(plan.degrees) else plan.degrees
    seg = remap[plan.segments[keep]]
    order = np.argsort(seg, kind="stable")
    return PairPlan(plan.members[keep][order], seg[order],
                    degs[order] if len(degs) else degs, plan.buckets[idx], len(idx))


def subset_edge_plan(plan: EdgePlan, idx) -> EdgePlan:
    idx = np.asarray(idx, np.int64)
    return EdgePlan(_subset_pairs(plan.pairs, idx), plan.u[idx], plan.v[idx])


def concat_edge_plans(a: EdgePlan, b: EdgePlan) -> EdgePlan:
    pa, pb = a.pairs, b.pairs
    pairs = PairPlan(np.concatenate([pa.members, pb.members]),
                     np.concatenate([pa.segments, pb.segments + pa.num_pairs]),
                     np.concatenate([pa.degrees, pb.degrees]),
                     np.concatenate([pa.buckets, pb.buckets]), pa.num_pairs + pb.num_pairs)
    return EdgePlan(pairs, np.concatenate([a.u, b.u]), np.concatenate([a.v, b.v]))


def subset_node_plan(plan: NodePlan, idx) -> NodePlan:
    idx = np.asarray(idx, np.int64)
    remap = np.full(len(plan.targets), -1, np.int64)
    remap[idx] = np.arange(len(idx))
    pair_idx = np.flatnonzero(remap[plan.pair_target] >= 0)
    new_target = remap[plan.pair_target[pair_idx]]
    return NodePlan(_subset_pairs(plan.pairs, pair_idx), new_target, plan.targets[idx])


# ---------------------------------------------------------------- training

@dataclass
class LinkEvalSet:
    graph: Graph
    pos: np.ndarray
    neg: np.ndarray
    plan: EdgePlan | None = None


def train(data, cfg: TrainConfig, labels=None, ledger=None, verbose: bool = False):
    """Train a geodesic model; returns ``(model, metrics)``.

    ``data`` is a :class:`Graph` for link and node tasks (``labels`` gives
    node classes for the node task) or a :class:`GraphCollection`.
    """
    if cfg.task == "link":
        return _train_link(data, cfg, ledger, verbose)
    if cfg.task == "node":
        if labels is None:
            raise ValueError("node task needs labels")
        return _train_node(data, np.asarray(labels), cfg, verbose)
    if not isinstance(data, GraphCollection) or data.labels is None:
        raise ValueError("graph task needs a labelled GraphCollection")
    return _train_graph(data, cfg, verbose)


def _eval_links(model: GeodesicModel, es: LinkEvalSet, hits_k: int) -> Metrics:
    if len(es.pos) == 0 or len(es.neg) == 0:
        raise ValueError("empty evaluation set")
    if es.plan is None:
        es.plan = build_edge_plan(es.graph, np.concatenate([es.pos, es.neg]), model.pool)
    scores = model.score_links(es.graph, plan=es.plan)
    pos, neg = scores[:len(es.pos)], scores[len(es.pos):]
    return Metrics(auc=roc_auc(pos, neg), ap=average_precision(pos, neg),
                   hits={hits_k: hits_at_k(pos, neg, hits_k)})


def _train_link(g: Graph, cfg: TrainConfig, ledger, verbose):
    rng = np.random.default_rng(cfg.seed)
    split = split_links(g, (1 - cfg.valid_ratio - cfg.test_ratio, cfg.valid_ratio, cfg.test_ratio),
                        seed=rng.integers(2**31))
    tg = split.train_graph
    all_pos = g.edge_array()
    model = build_model(cfg, input_features(tg, cfg.degree_feature).shape[1], 1, rng)
    pool = model.pool
    # held-out negatives are always uniform non-edges
    valid_neg = sample_negatives(g, split.valid, cfg.neg_ratio, rng.integers(2**31),
                                 mode="uniform")
    test_neg = sample_negatives(g, split.test, cfg.neg_ratio, rng.integers(2**31),
                                exclude=valid_neg, mode="uniform")
    valid = LinkEvalSet(tg, split.valid, valid_neg)
    test = LinkEvalSet(tg, split.test, test_neg)
    # positives see the graph without their own edge; fixed across epochs
    pos_plan = build_edge_plan(tg, split.train, pool, exclude=np.ones(len(split.train), bool))
    cache = DistanceCache(tg, pool.d_max, maxsize=4096)
    opt = Adam(model.params, cfg.lr)
    metrics = Metrics()
    best = (-np.inf, model.params.copy(), 0)
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        held = np.concatenate([valid_neg, test_neg])
        neg = sample_negatives(g, split.train, cfg.neg_ratio, rng.integers(2**31), exclude=held,
                               mode=cfg.neg_mode)
        plan = concat_edge_plans(pos_plan, build_edge_plan(tg, neg, pool, cache=cache))
        y = np.concatenate([np.ones(len(split.train)), np.zeros(len(neg))])
        order = rng.permutation(len(y))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            rec = ComputationRecord()
            # the batch's own positive links are hidden from message passing
            batch_pos = plan.u[idx][y[idx] == 1], plan.v[idx][y[idx] == 1]
            mp_graph = tg.without_edges(np.stack(batch_pos, axis=1)) if len(batch_pos[0]) else tg
            h, _ = model.embed(mp_graph, rec, ledger)
            logits = model.link_logits(rec, h, subset_edge_plan(plan, idx))
            loss = rec.bce_with_logits(logits, y[idx])
            step += 1
            _check_finite(loss.value.item(), epoch, step)
            opt.step(rec.backward(loss))
            losses.append(loss.value.item())
        metrics.log(epoch, "train", "loss", float(np.mean(losses)))
        vm = _eval_links(model, valid, cfg.hits_k)
        metrics.log(epoch, "valid", "auc", vm.auc)
        if verbose:
            log.info("epoch %d loss %.4f valid auc %.4f", epoch, np.mean(losses), vm.auc)
        if vm.auc > best[0]:
            best = (vm.auc, model.params.copy(), epoch)
    model.params.values.update(best[1].values)
    tm = _eval_links(model, test, cfg.hits_k)
    vm = _eval_links(model, valid, cfg.hits_k)
    metrics.auc, metrics.ap, metrics.hits = tm.auc, tm.ap, tm.hits
    for split_name, m in (("valid", vm), ("test", tm)):
        for key, val in m.summary().items():
            metrics.log(best[2], split_name, f"best_{key}", val)
    model.split = split
    model.eval_sets = {"valid": valid, "test": test}
    return model, metrics


def _split_indices(n: int, rng, valid_ratio: float, test_ratio: float):
    perm = rng.permutation(n)
    n_test = max(1, int(round(n * test_ratio)))
    n_valid = int(round(n * valid_ratio))
    return (np.sort(perm[n_test + n_valid:]), np.sort(perm[n_test:n_test + n_valid]),
            np.sort(perm[:n_test]))


def _train_node(g: Graph, labels: np.ndarray, cfg: TrainConfig, verbose):
    rng = np.random.default_rng(cfg.seed)
    n_classes = int(labels.max()) + 1
    model = build_model(cfg, input_features(g, cfg.degree_feature).shape[1], n_classes, rng)
    tr, va, te = _split_indices(g.num_nodes, rng, cfg.valid_ratio, cfg.test_ratio)
    plan = build_node_plan(g, np.arange(g.num_nodes), model.pool)
    opt = Adam(model.params, cfg.lr)
    metrics = Metrics()
    best = (-np.inf, model.params.copy(), 0)
    step = 0

    def acc(idx):
        return accuracy(model.predict_nodes(g, plan=subset_node_plan(plan, idx)), labels[idx])

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(tr)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            rec = ComputationRecord()
            h, _ = model.embed(g, rec)
            logits = model.node_logits(rec, h, subset_node_plan(plan, idx))
            loss = rec.softmax_cross_entropy(logits, labels[idx])
            step += 1
            _check_finite(loss.value.item(), epoch, step)
            opt.step(rec.backward(loss))
            losses.append(loss.value.item())
        metrics.log(epoch, "train", "loss", float(np.mean(losses)))
        metrics.log(epoch, "train", "accuracy", acc(tr))
        score = acc(va) if len(va) else acc(tr)
        metrics.log(epoch, "valid", "accuracy", score)
        if score > best[0]:
            best = (score, model.params.copy(), epoch)
    model.params.values.update(best[1].values)
    metrics.accuracy = acc(te)
    metrics.log(best[2], "test", "best_accuracy", metrics.accuracy)
    model.node_split = (tr, va, te)
    return model, metrics


def _train_graph(coll: GraphCollection, cfg: TrainConfig, verbose, split=None):
    rng = np.random.default_rng(cfg.seed)
    labels = np.asarray(coll.labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    in_dim = input_features(coll.graphs[0], cfg.degree_feature).shape[1]
    model = build_model(cfg, in_dim, n_classes, rng)
    plans = [build_node_plan(g, np.arange(g.num_nodes), model.pool) for g in coll.graphs]
    tr, va, te = split or _split_indices(len(coll), rng, cfg.valid_ratio, cfg.test_ratio)
    opt = Adam(model.params, cfg.lr)
    metrics = Metrics()
    best = (-np.inf, model.params.copy(), 0)
    step = 0

    def acc(idx):
        pred = model.predict_graphs([coll.graphs[i] for i in idx], [plans[i] for i in idx])
        return accuracy(pred, labels[idx])

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(tr)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            rec = ComputationRecord()
            logits = model.graph_logits(rec, [coll.graphs[i] for i in idx], [plans[i] for i in idx])
            loss = rec.softmax_cross_entropy(logits, labels[idx])
            step += 1
            _check_finite(loss.value.item(), epoch, step)
            opt.step(rec.backward(loss))
            losses.append(loss.value.item())
        metrics.log(epoch, "train", "loss", float(np.mean(losses)))
        metrics.log(epoch, "train", "accuracy", acc(tr))
        score = acc(va) if len(va) else acc(tr)
        metrics.log(epoch, "valid", "accuracy", score)
        if score > best[0]:
            best = (score, model.params.copy(), epoch)
    model.params.values.update(best[1].values)
    metrics.accuracy = acc(te)
    metrics.log(best[2], "test", "best_accuracy", metrics.accuracy)
    model.graph_split = (tr, va, te)
    return model, metrics


def evaluate(model: GeodesicModel, eval_set, task: str | None = None, hits_k: int = 50,
             labels=None) -> Metrics:
    """Score a trained model.

    ``eval_set`` is a :class:`LinkEvalSet` for links, ``(graph, nodes)`` for
    node classification, or a labelled :class:`GraphCollection`.
    """
    task = task or model.task
    if task == "link":
        return _eval_links(model, eval_set, hits_k)
    if task == "node":
        g, nodes = eval_set
        nodes = np.asarray(nodes)
        if len(nodes) == 0:
            raise ValueError("empty evaluation set")
        return Metrics(accuracy=accuracy(model.predict_nodes(g, nodes), np.asarray(labels)[nodes]))
    if len(eval_set) == 0:
        raise ValueError("empty evaluation set")
    return Metrics(accuracy=accuracy(model.predict_graphs(eval_set.graphs),
                                     np.asarray(eval_set.labels)))
