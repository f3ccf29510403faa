"""Minimal reverse-mode tape over numpy arrays.

Every forward op appends one step holding its cached inputs and a closure
that maps the output gradient to the input gradients.  Steps are recorded in
execution order, so replaying them backwards is a valid topological order.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class RecordConsumedError(RuntimeError):
    pass


class Node:
    __slots__ = ("value", "parents", "backward_fn", "requires_grad", "kind", "name")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False,
                 kind="const", name=None):
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.kind = kind
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.kind}, shape={self.value.shape})"


class ComputationRecord:
    """Ordered list of primitive forward steps with their cached activations."""

    def __init__(self):
        self.steps: list[Node] = []
        self.params: dict[str, Node] = {}
        self.output: Node | None = None
        self.consumed = False

    # -- leaves

    def param(self, name: str, value: np.ndarray) -> Node:
        if name not in self.params:
            self.params[name] = Node(value, requires_grad=True, kind="param", name=name)
        return self.params[name]

    @staticmethod
    def const(value) -> Node:
        return Node(np.asarray(value))

    def _step(self, kind, value, parents, backward_fn) -> Node:
        req = any(p.requires_grad for p in parents)
        node = Node(value, tuple(parents), backward_fn if req else None, req, kind)
        self.steps.append(node)
        self.output = node
        return node

    # -- primitives

    def matmul(self, a: Node, b: Node) -> Node:
        av, bv = a.value, b.value
        return self._step("matmul", av @ bv, (a, b),
                          lambda g: (g @ bv.T, av.T @ g))

    def spmm(self, mat: sp.spmatrix, x: Node, kind="neighbor_sum") -> Node:
        """Constant sparse matrix times ``x`` (neighbor sums, normalised propagation)."""
        mt = mat.T.tocsr()
        return self._step(kind, mat @ x.value, (x,), lambda g: (mt @ g,))

    def add(self, a: Node, b: Node) -> Node:
        """Elementwise sum; ``b`` may be a row vector broadcast over rows."""
        sa, sb = a.value.shape, b.value.shape

        def back(g):
            return _unbroadcast(g, sa), _unbroadcast(g, sb)
        return self._step("add", a.value + b.value, (a, b), back)

    def scale_add(self, eps: Node, h: Node, agg: Node) -> Node:
        """``(1 + eps) * h + agg``, the GIN self/neighbor combination."""
        e, hv = eps.value, h.value
        return self._step("gin_combine", (1.0 + e) * hv + agg.value, (eps, h, agg),
                          lambda g: (np.array([np.sum(g * hv)]).reshape(e.shape),
                                     (1.0 + e) * g, g))

    def mul_const(self, x: Node, c) -> Node:
        return self._step("scale", x.value * c, (x,), lambda g: (g * c,))

    def relu(self, x: Node) -> Node:
        mask = x.value > 0
        return self._step("relu", x.value * mask, (x,), lambda g: (g * mask,))

    def identity(self, x: Node) -> Node:
        return x

    def concat(self, nodes: list[Node]) -> Node:
        widths = [n.value.shape[1] for n in nodes]
        cuts = np.cumsum(widths)[:-1]
        return self._step("concat", np.concatenate([n.value for n in nodes], axis=1),
                          tuple(nodes), lambda g: tuple(np.split(g, cuts, axis=1)))

    def vstack(self, nodes: list[Node]) -> Node:
        cuts = np.cumsum([n.value.shape[0] for n in nodes])[:-1]
        return self._step("concat", np.concatenate([n.value for n in nodes], axis=0),
                          tuple(nodes), lambda g: tuple(np.split(g, cuts, axis=0)))

    def gather(self, x: Node, idx: np.ndarray) -> Node:
        n = x.value.shape[0]

        def back(g):
            out = np.zeros((n,) + g.shape[1:], dtype=g.dtype)
            np.add.at(out, idx, g)
            return (out,)
        return self._step("gather", x.value[idx], (x,), back)

    def segment_reduce(self, x: Node, segments: np.ndarray, num_segments: int,
                       reducer: str = "sum") -> Node:
        """Pool rows of ``x`` into ``num_segments`` groups; empty groups give zeros."""
        return self._step("pool", *_segment_op(x, segments, num_segments, reducer))

    # -- losses (return a 1x1 node)

    def bce_with_logits(self, logits: Node, targets: np.ndarray) -> Node:
        z = logits.value.reshape(-1)
        y = np.asarray(targets, dtype=z.dtype).reshape(-1)
        loss = np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z))))
        shape = logits.value.shape

        def back(g):
            p = 0.5 * (1.0 + np.tanh(0.5 * z))
            return ((p - y).reshape(shape) * (g.item() / len(z)),)
        return self._step("loss", np.array([[loss]]), (logits,), back)

    def softmax_cross_entropy(self, logits: Node, targets: np.ndarray) -> Node:
        z = logits.value
        t = np.asarray(targets, dtype=np.int64)
        zs = z - z.max(axis=1, keepdims=True)
        logp = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
        loss = -np.mean(logp[np.arange(len(t)), t])

        def back(g):
            p = np.exp(logp)
            p[np.arange(len(t)), t] -= 1.0
            return (p * (g.item() / len(t)),)
        return self._step("loss", np.array([[loss]]), (logits,), back)

    def weighted_sum(self, x: Node, weights: np.ndarray) -> Node:
        """Scalar ``sum(weights * x)``; the generic random-loss used by gradient checks."""
        w = np.asarray(weights)
        return self._step("loss", np.array([[np.sum(w * x.value)]]), (x,),
                          lambda g: (w * g.item(),))

    # -- reverse pass

    def backward(self, output: Node | None = None, out_grad=None) -> dict[str, np.ndarray]:
        """Gradients of ``<out_grad, output>`` w.r.t. every parameter leaf."""
        if self.consumed:
            raise RecordConsumedError("computation record already consumed")
        self.consumed = True
        output = self.output if output is None else output
        if output is None:
            raise ValueError("empty record")
        if out_grad is None:
            out_grad = np.ones_like(output.value)
        grads: dict[int, np.ndarray] = {id(output): np.asarray(out_grad, dtype=output.value.dtype)}
        for node in reversed(self.steps):
            g = grads.pop(id(node), None)
            if g is None or node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        out = {}
        for name, leaf in self.params.items():
            g = grads.get(id(leaf))
            out[name] = np.zeros_like(leaf.value) if g is None else np.asarray(g).reshape(leaf.value.shape)
        if id(output) in grads and output.kind == "param":
            out[output.name] = grads[id(output)]
        return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def segment_matrix(segments: np.ndarray, num_segments: int, num_rows: int,
                   weights: np.ndarray | None = None) -> sp.csr_matrix:
    data = np.ones(num_rows) if weights is None else weights
    return sp.csr_matrix((data, (segments, np.arange(num_rows))),
                         shape=(num_segments, num_rows))


def _segment_op(x: Node, segments, num_segments, reducer):
    xv = x.value
    rows = xv.shape[0]
    segments = np.asarray(segments, dtype=np.int64)
    if reducer in ("sum", "mean"):
        weights = None
        if reducer == "mean":
            counts = np.bincount(segments, minlength=num_segments).astype(xv.dtype)
            weights = 1.0 / counts[segments] if rows else np.zeros(0)
        mat = segment_matrix(segments, num_segments, rows, weights).astype(xv.dtype)
        mt = mat.T.tocsr()
        return mat @ xv, (x,), lambda g: (mt @ g,)
    if reducer == "max":
        width = xv.shape[1]
        out = np.full((num_segments, width), -np.inf, dtype=xv.dtype)
        np.maximum.at(out, segments, xv)
        empty = np.isneginf(out[:, 0]) if width else np.zeros(num_segments, bool)
        out[empty] = 0.0
        # the first row attaining each segment maximum receives the gradient
        hit = xv == out[segments]
        order = np.arange(rows)
        owner = np.full((num_segments, width), rows, dtype=np.int64)
        r, c = np.nonzero(hit)
        np.minimum.at(owner, (segments[r], c), order[r])

        def back(g):
            gx = np.zeros_like(xv)
            s, c2 = np.nonzero(owner < rows)
            gx[owner[s, c2], c2] = g[s, c2]
            return (gx,)
        return out, (x,), back
    raise ValueError(f"unknown reducer {reducer!r}")
