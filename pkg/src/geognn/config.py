"""Training configuration and its flat ``key=value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import get_type_hints

from .pooling import PoolConfig, Variant

TASKS = ("link", "node", "graph")


@dataclass
class TrainConfig:
    task: str = "link"
    kind: str = "gcn"
    layers: int = 3
    hidden: int = 32
    d_max: int | None = None  # None ties the cutoff to the number of layers
    variant: str = "vertical"
    reducer: str = "sum"
    node_reducer: str = "sum"
    graph_reducer: str = "mean"
    node_k: int | None = None
    horizontal_distance: bool = False
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 64
    neg_ratio: int = 1
    neg_mode: str = "uniform"  # or "corrupt"
    valid_ratio: float = 0.05
    test_ratio: float = 0.10
    hits_k: int = 50
    degree_feature: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        Variant.parse(self.variant)
        for name in ("layers", "hidden", "epochs", "batch_size", "neg_ratio", "hits_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.neg_mode not in ("uniform", "corrupt"):
            raise ValueError("neg_mode must be 'uniform' or 'corrupt'")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.d_max is not None and self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if not (0 <= self.valid_ratio < 1 and 0 < self.test_ratio < 1
                and self.valid_ratio + self.test_ratio < 1):
            raise ValueError("valid_ratio + test_ratio must leave room for training edges")

    @property
    def cutoff(self) -> int:
        return self.layers if self.d_max is None else self.d_max

    def pool_config(self) -> PoolConfig:
        return PoolConfig(variant=self.variant, reducer=self.reducer, d_max=self.cutoff,
                          node_k=self.node_k, node_reducer=self.node_reducer,
                          graph_reducer=self.graph_reducer,
                          horizontal_distance=self.horizontal_distance, seed=self.seed)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name}={_fmt(getattr(self, f.name))}\n" for f in fields(self))


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(name: str, raw: str, hint):
    text = raw.strip()
    optional = "None" in str(hint)
    if optional and text.lower() in ("none", ""):
        return None
    base = str(hint)
    if "bool" in base:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if "int" in base:
        return int(text)
    if "float" in base:
        return float(text)
    return text


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines (``#`` comments allowed) into typed overrides."""
    hints = get_type_hints(TrainConfig)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in hints:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value, hints[key])
    return out


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return TrainConfig(**values)
