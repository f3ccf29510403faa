"""Geodesic-augmented graph neural networks.

One message-passing run embeds every node; shortest-path (geodesic)
structure between query nodes is then pooled from those embeddings to score
links, classify nodes or classify whole graphs.
"""

from .config import TrainConfig, load_config
from .expressiveness import (canonical_signature, distinguish_pair, edge_configurations,
                             regular_dmax, wl_refine)
from .geodesic import (UNREACHABLE, bfs_distances, horizontal_geodesic, vertical_geodesic,
                       vertical_geodesic_one_side)
from .gnn import ModelParams, gnn_forward, init_params
from .graph import Graph, GraphCollection, build_graph, induced_degrees, k_hop_neighborhood
from .metrics import Metrics
from .pooling import PoolConfig, Variant
from .training import GeodesicModel, evaluate, sample_negatives, split_links, train

__version__ = "0.1.0"
