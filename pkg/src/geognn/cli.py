"""Command-line entry point: ``geognn <command> ...``.

Exit status is 0 on success, 1 on a usage error and 2 on a data error
(missing or malformed input files, infeasible parameters).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import generators as gen
from .bench import (BENCH_HEADER, METHODS, BaselineConfig, disjoint_queries,
                    parallel_edge_plan, run_benchmark)
from .config import TrainConfig, load_config, parse_config_text
from .datasets import load_cora
from .expressiveness import (SIGNATURE_VARIANTS, canonical_signature, distinguish_pair,
                             node_signature, regular_dmax, wl_refine)
from .geodesic import bfs_distances, horizontal_geodesic, vertical_geodesic
from .gnn import load_checkpoint, save_checkpoint
from .graph import (Graph, GraphCollection, GraphFormatError, format_edge_list,
                    read_collection, read_edge_list)
from .metrics import Metrics, accuracy, average_precision, hits_at_k, roc_auc
from .training import GeodesicModel, LinkEvalSet, evaluate, train

log = logging.getLogger("geognn")

USAGE_ERROR, DATA_ERROR = 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


# ---------------------------------------------------------------- inputs

def load_graph(spec: str) -> Graph:
    """Edge-list path, a named fixture (``shrikhande``, ``rook``, ...) or ``cora``."""
    if os.path.exists(spec):
        return read_edge_list(spec)
    if spec == "cora":
        return load_cora()
    if spec in gen.NAMED_GRAPHS:
        out = gen.NAMED_GRAPHS[spec]()
        return out[0] if isinstance(out, tuple) else out
    if spec.startswith("csl"):
        return gen.csl_graph(41, int(spec[3:].lstrip(":-")))
    raise FileNotFoundError(f"no such graph file or named graph: {spec}")


def read_labels(path, n: int) -> np.ndarray:
    """One integer per line in node order, or ``node<TAB>label`` lines."""
    labels = np.full(n, -1, dtype=np.int64)
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    for i, row in enumerate(rows):
        node, lab = (i, row[0]) if len(row) == 1 else (row[0], row[1])
        try:
            labels[int(node)] = int(lab)
        except (ValueError, IndexError) as exc:
            raise GraphFormatError(f"{path}: bad label line {i + 1}") from exc
    if np.any(labels < 0):
        raise GraphFormatError(f"{path}: labels missing for {int(np.sum(labels < 0))} nodes")
    return labels


def read_pairs(path):
    """``u<TAB>v[<TAB>label]`` query lines; returns (pairs, labels or None)."""
    rows = []
    with open(path) as fh:
        for i, ln in enumerate(fh, 1):
            if not ln.strip() or ln.startswith("#"):
                continue
            parts = ln.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"{path}:{i}: expected u v [label]")
            rows.append([int(p) for p in parts])
    if not rows:
        raise GraphFormatError(f"{path}: no pairs")
    if len({len(r) for r in rows}) != 1:
        raise GraphFormatError(f"{path}: mixed labelled and unlabelled lines")
    arr = np.array(rows, dtype=np.int64)
    return arr[:, :2], (arr[:, 2] if arr.shape[1] == 3 else None)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt_nodes(nodes) -> str:
    return " ".join(str(int(w)) for w in sorted(nodes)) or "-"


# ---------------------------------------------------------------- commands

def cmd_wl(args) -> int:
    g = load_graph(args.graph)
    part = wl_refine(g, args.rounds)
    lines = [f"{v}\t{c}" for v, c in enumerate(part.colors)]
    lines += [f"classes\t{part.num_classes}", f"rounds\t{part.rounds_to_stabilize}"]
    print("\n".join(lines))
    return 0


def cmd_geodesic(args) -> int:
    g = load_graph(args.graph)
    u, v = args.pair
    if not (0 <= u < g.num_nodes and 0 <= v < g.num_nodes):
        raise UsageError(f"pair ({u}, {v}) out of range for {g.num_nodes} nodes")
    dm_u = bfs_distances(g, u, args.dmax)
    dm_v = bfs_distances(g, v, args.dmax)
    d = dm_u[v]
    if d < 0:
        print("distance\tinf")
        return 0
    rng = np.random.default_rng(args.seed)
    path = horizontal_geodesic(g, u, v, dm_v, args.policy, rng)
    vg = vertical_geodesic(g, u, v, dm_u, dm_v)
    print(f"distance\t{d}")
    print("path\t" + " ".join(str(w) for w in path.path))
    print(f"near_u\t{_fmt_nodes(vg.near_u)}")
    print(f"near_v\t{_fmt_nodes(vg.near_v)}")
    print("degrees\t" + (" ".join(f"{w}:{k}" for w, k in sorted(vg.degrees.items())) or "-"))
    return 0


def _sig_variant(name: str) -> str:
    key = name.lower().replace("-", "").replace("_", "")
    key = {"vertical": "vert", "verticaldeg": "vertdeg", "horizontal": "hor"}.get(key, key)
    if key not in SIGNATURE_VARIANTS + ("wl",):
        raise UsageError(f"unknown variant {name!r}; choose from vert, vertdeg, hor, wl")
    return key


def cmd_signature(args) -> int:
    g = load_graph(args.graph)
    variant = _sig_variant(args.variant)
    if variant == "wl":
        raise UsageError("signature needs vert, vertdeg or hor")
    sig = canonical_signature(g, args.dmax, variant)
    if args.nodes:
        for v in range(g.num_nodes):
            print(f"{v}\t{node_signature(g, v, args.dmax, variant)}")
    print(f"digest\t{sig.digest()}")
    print(f"distinct_nodes\t{sig.num_distinct_nodes}")
    return 0


def cmd_distinguish(args) -> int:
    variants = [_sig_variant(v) for v in args.variant.split(",")]
    if args.regular:
        n, r, count = args.regular
        dmax = args.dmax if args.dmax is not None else regular_dmax(n, r, args.eps)
        rng = np.random.default_rng(args.seed)
        pairs = []
        for i in range(count):
            s1, s2 = rng.integers(2**31, size=2)
            pairs.append((str(i), gen.random_regular_graph(n, r, int(s1)),
                          gen.random_regular_graph(n, r, int(s2))))
    else:
        if len(args.graphs) < 2:
            raise UsageError("distinguish needs at least two graphs (or --regular N R COUNT)")
        graphs = [load_graph(s) for s in args.graphs]
        dmax = args.dmax if args.dmax is not None else 3
        pairs = [(f"{i}-{j}" if len(graphs) > 2 else "0", graphs[i], graphs[j])
                 for i in range(len(graphs)) for j in range(i + 1, len(graphs))]
    hits = {v: 0 for v in variants}
    for pid, g1, g2 in pairs:
        for v in variants:
            res = distinguish_pair(g1, g2, dmax, v)
            hits[v] += res
            print(f"{pid}\t{v}\t{int(res)}")
    if args.summary:
        for v in variants:
            print(f"# {v}: {hits[v]}/{len(pairs)} distinguished at d_max={dmax}",
                  file=sys.stderr)
    return 0


def _train_config(args, **extra) -> TrainConfig:
    overrides = {"d_max": args.dmax, "variant": args.variant, "seed": args.seed}
    for key in ("task", "kind", "layers", "hidden", "epochs", "lr", "batch_size",
                "reducer", "neg_ratio"):
        overrides[key] = getattr(args, key, None)
    overrides.update(extra)
    try:
        return load_config(args.config, overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _train_data(args, cfg):
    if cfg.task == "graph":
        coll = read_collection(args.data)
        if coll.labels is None:
            raise GraphFormatError(f"{args.data}: graph task needs labels")
        return coll, None
    g = load_graph(args.data)
    labels = None
    if cfg.task == "node":
        if not args.labels:
            raise UsageError("node task needs --labels FILE")
        labels = read_labels(args.labels, g.num_nodes)
    return g, labels


def cmd_train(args) -> int:
    cfg = _train_config(args)
    data, labels = _train_data(args, cfg)
    if args.sweep_dmax:
        if cfg.task != "link":
            raise UsageError("--sweep-dmax applies to the link task")
        rows, scores = ["d_max,valid_auc,test_auc"], []
        for d in args.sweep_dmax:
            _, m = train(data, cfg.replace(d_max=d))
            best = dict(((s, k), v) for _, s, k, v in m.history if k.startswith("best_"))
            scores.append(best[("valid", "best_auc")])
            rows.append(f"{d},{scores[-1]:.6f},{m.auc:.6f}")
        _emit("\n".join(rows) + "\n", args.out)
        if args.figdir:
            from .plotting import plot_sweep
            plot_sweep(args.sweep_dmax, scores, Path(args.figdir) / "dmax_sweep.png")
        return 0
    model, metrics = train(data, cfg, labels=labels, verbose=args.verbose)
    _emit(metrics.to_csv(), args.out)
    for k, v in metrics.summary().items():
        print(f"# test {k} = {v:.4f}", file=sys.stderr)
    if args.checkpoint:
        extra = {}
        if cfg.task == "link":
            extra = {"test_pos": model.eval_sets["test"].pos, "test_neg": model.eval_sets["test"].neg,
                     "held_out": np.concatenate([model.split.valid, model.split.test])}
        elif cfg.task == "node":
            extra = {"test_nodes": model.node_split[2]}
        else:
            extra = {"test_graphs": model.graph_split[2]}
        save_checkpoint(args.checkpoint, model.params, {"config": cfg.to_text()}, extra)
    if args.figdir:
        from .plotting import plot_training
        plot_training(metrics, Path(args.figdir) / f"training_{cfg.task}.png")
    return 0


def _metrics_csv(m: Metrics) -> str:
    return "metric,value\n" + "".join(f"{k},{v:.6f}\n" for k, v in m.summary().items())


def cmd_eval(args) -> int:
    params, meta, extra = load_checkpoint(args.checkpoint)
    cfg = TrainConfig(**parse_config_text(meta.get("config", "")))
    if args.dmax is not None or args.variant is not None:
        raise UsageError("--dmax/--variant are fixed by the checkpoint")
    model = GeodesicModel(params, cfg.pool_config(), cfg.task, cfg.degree_feature)
    if cfg.task == "graph":
        coll = read_collection(args.data)
        idx = extra.get("test_graphs") if args.pairs is None else None
        if idx is not None and len(idx) and idx.max() < len(coll):
            coll = GraphCollection([coll.graphs[i] for i in idx], [coll.labels[i] for i in idx])
        _emit(_metrics_csv(evaluate(model, coll, "graph")), args.out)
        return 0
    g = load_graph(args.data)
    if cfg.task == "node":
        if not args.labels:
            raise UsageError("node task needs --labels FILE")
        labels = read_labels(args.labels, g.num_nodes)
        nodes = extra.get("test_nodes", np.arange(g.num_nodes))
        _emit(_metrics_csv(evaluate(model, (g, nodes), "node", labels=labels)), args.out)
        return 0
    if "held_out" in extra and len(extra["held_out"]) and extra["held_out"].max() < g.num_nodes:
        mp_graph = g.without_edges(extra["held_out"])
    else:
        mp_graph = g
    if args.pairs:
        pairs, y = read_pairs(args.pairs)
        if pairs.max() >= g.num_nodes or pairs.min() < 0:
            raise GraphFormatError(f"{args.pairs}: node id out of range")
        plan = parallel_edge_plan(mp_graph, pairs, model.pool, args.threads)
        scores = model.score_links(mp_graph, plan=plan)
        lines = [f"{u}\t{v}\t{s:.6f}" for (u, v), s in zip(pairs, scores)]
        text = "\n".join(lines) + "\n"
        if y is not None and 0 < y.sum() < len(y):
            pos, neg = scores[y == 1], scores[y == 0]
            m = Metrics(auc=roc_auc(pos, neg), ap=average_precision(pos, neg),
                        hits={cfg.hits_k: hits_at_k(pos, neg, cfg.hits_k)},
                        accuracy=accuracy((scores > 0).astype(int), y))
            text += "".join(f"# {k}={v:.6f}\n" for k, v in m.summary().items())
        _emit(text, args.out)
        return 0
    if "test_pos" not in extra:
        raise UsageError("checkpoint has no stored test split; pass --pairs FILE")
    es = LinkEvalSet(mp_graph, extra["test_pos"], extra["test_neg"])
    es.plan = parallel_edge_plan(mp_graph, np.concatenate([es.pos, es.neg]), model.pool,
                                 args.threads)
    _emit(_metrics_csv(evaluate(model, es, "link", cfg.hits_k)), args.out)
    return 0


def cmd_bench(args) -> int:
    if args.data:
        g = load_graph(args.data)
    else:
        n, m = args.synthetic
        g = gen.gnm_random_graph(n, m, seed=args.seed)
    queries = disjoint_queries(g, args.queries, args.seed)
    from .pooling import PoolConfig
    pool = PoolConfig(variant=args.variant or "vertical",
                      d_max=args.dmax if args.dmax is not None else args.layers)
    methods = METHODS if args.method == "both" else (args.method,)
    ledgers = []
    rows = [BENCH_HEADER]
    for method in methods:
        ledger, _ = run_benchmark(g, queries, method, pool, BaselineConfig(args.radius),
                                  layers=args.layers, hidden=args.hidden, seed=args.seed,
                                  threads=args.threads)
        ledgers.append(ledger)
        rows.append(ledger.csv_row())
    _emit("\n".join(rows) + "\n", args.out)
    if args.figdir:
        from .plotting import plot_bench
        plot_bench(ledgers, Path(args.figdir) / "bench.png")
    return 0


GEN_FAMILIES = ("cycle", "path", "complete", "csl", "shrikhande", "rook", "regular", "gnm",
                "triangle-square", "six-cycle", "path-context", "vertical-fixture")


def cmd_gen(args) -> int:
    fam = args.family
    if fam in ("cycle", "path", "complete") and args.n is None:
        raise UsageError(f"{fam} needs --n")
    if fam == "cycle":
        g = gen.cycle_graph(args.n)
    elif fam == "path":
        g = gen.path_graph(args.n)
    elif fam == "complete":
        g = gen.complete_graph(args.n)
    elif fam == "csl":
        g = gen.csl_graph(args.n or 41, args.skip)
    elif fam == "shrikhande":
        g = gen.shrikhande()
    elif fam == "rook":
        g = gen.rook4x4()
    elif fam == "regular":
        g = gen.random_regular_graph(args.n or 50, args.r, args.seed)
    elif fam == "gnm":
        g = gen.gnm_random_graph(args.n or 1000, args.m or 5000, seed=args.seed)
    elif fam == "triangle-square":
        g = gen.triangle_square()
    elif fam == "six-cycle":
        g = gen.six_cycle_links()[0]
    elif fam == "path-context":
        g = gen.path_context_graph()[0]
    else:
        g = gen.vertical_beats_horizontal()[0]
    _emit(format_edge_list(g), args.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geognn", description="Geodesic GNN toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, dmax_default=3, variant=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--dmax", type=int, default=dmax_default)
        if variant:
            sp.add_argument("--variant", default=None)
        sp.add_argument("-o", "--out", default=None, help="write the report here instead of stdout")

    sp = sub.add_parser("wl", help="1-WL colour refinement")
    sp.add_argument("graph")
    sp.add_argument("--rounds", type=int, default=None)
    sp.set_defaults(func=cmd_wl)

    sp = sub.add_parser("geodesic", help="horizontal and vertical geodesic of a pair")
    sp.add_argument("graph")
    sp.add_argument("--pair", type=int, nargs=2, required=True, metavar=("U", "V"))
    sp.add_argument("--policy", choices=("lexicographic", "seeded-random"),
                    default="lexicographic")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dmax", type=int, default=3)
    sp.set_defaults(func=cmd_geodesic)

    sp = sub.add_parser("signature", help="canonical training-free signature")
    sp.add_argument("graph")
    sp.add_argument("--dmax", type=int, default=3)
    sp.add_argument("--variant", default="vert")
    sp.add_argument("--nodes", action="store_true", help="also print per-node signatures")
    sp.set_defaults(func=cmd_signature)

    sp = sub.add_parser("distinguish", help="compare graphs by signature or 1-WL")
    sp.add_argument("graphs", nargs="*")
    sp.add_argument("--variant", default="vert", help="comma list of vert, vertdeg, hor, wl")
    sp.add_argument("--dmax", type=int, default=None)
    sp.add_argument("--regular", type=int, nargs=3, metavar=("N", "R", "COUNT"),
                    help="sample COUNT pairs of random N-node R-regular graphs")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--summary", action="store_true")
    sp.set_defaults(func=cmd_distinguish)

    for name, func in (("train", cmd_train), ("eval", cmd_eval)):
        sp = sub.add_parser(name)
        if name == "eval":
            sp.add_argument("checkpoint")
        sp.add_argument("data", help="edge list, named graph, cora, or a collection file")
        sp.add_argument("--config", default=None)
        sp.add_argument("--labels", default=None, help="node labels for the node task")
        common(sp, dmax_default=None)
        if name == "train":
            sp.add_argument("--task", choices=("link", "node", "graph"), default=None)
            sp.add_argument("--kind", choices=("gcn", "gin"), default=None)
            sp.add_argument("--layers", type=int, default=None)
            sp.add_argument("--hidden", type=int, default=None)
            sp.add_argument("--epochs", type=int, default=None)
            sp.add_argument("--lr", type=float, default=None)
            sp.add_argument("--batch-size", dest="batch_size", type=int, default=None)
            sp.add_argument("--reducer", choices=("sum", "mean", "max"), default=None)
            sp.add_argument("--neg-ratio", dest="neg_ratio", type=int, default=None)
            sp.add_argument("--checkpoint", default=None)
            sp.add_argument("--sweep-dmax", type=int, nargs="+", default=None)
            sp.add_argument("--figdir", default=None)
        else:
            sp.add_argument("--pairs", default=None, help="u v [label] lines to score")
            sp.add_argument("--threads", type=int, default=1)
        sp.set_defaults(func=func)

    sp = sub.add_parser("bench", help="GNN-run ledger: geodesic model vs subgraph baseline")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--data", default=None)
    src.add_argument("--synthetic", type=int, nargs=2, metavar=("N", "M"), default=(10_000, 30_000))
    sp.add_argument("--queries", type=int, default=1000)
    sp.add_argument("--method", choices=METHODS + ("both",), default="both")
    sp.add_argument("--radius", type=int, default=2)
    sp.add_argument("--layers", type=int, default=3)
    sp.add_argument("--hidden", type=int, default=32)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--config", default=None, help="accepted for symmetry; unused")
    sp.add_argument("--figdir", default=None)
    common(sp, dmax_default=None)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gen", help="write a generated graph as an edge list")
    sp.add_argument("family", choices=GEN_FAMILIES)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--r", type=int, default=3)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--skip", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--out", default=None)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"geognn {args.command}: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (OSError, GraphFormatError, gen.InfeasibleGraphError) as exc:
        print(f"geognn {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ValueError as exc:
        print(f"geognn {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
