"""Bundled datasets."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .graph import Graph, build_graph


def load_cora() -> Graph:
    """Cora citation graph (2708 nodes), structure only, as an undirected graph.

    The bundled file holds one ``cited citing`` pair of raw paper ids per
    line; ids are mapped to ``0..n-1`` in ascending numeric order.
    """
    text = resources.files("geognn").joinpath("data/cora.cites").read_text()
    raw = np.array([line.split() for line in text.splitlines() if line.strip()], dtype=np.int64)
    ids, inv = np.unique(raw, return_inverse=True)
    return build_graph(inv.reshape(raw.shape), len(ids))
