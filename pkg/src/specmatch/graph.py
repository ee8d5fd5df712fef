"""Graphs, datasets, the synthetic SBM generator and JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class GraphValidationError(ValueError):
    pass


class DatasetParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _canonical_edges(edges, n_nodes: int) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2) if len(edges) else np.zeros((0, 2), np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= n_nodes):
        bad = arr[(arr < 0).any(axis=1) | (arr >= n_nodes).any(axis=1)][0]
        raise GraphValidationError(
            f"edge ({bad[0]}, {bad[1]}) out of range for graph with {n_nodes} nodes"
        )
    if np.any(arr[:, 0] == arr[:, 1]):
        raise GraphValidationError("self-loops are not allowed")
    arr = np.sort(arr, axis=1)
    arr = np.unique(arr, axis=0)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with a dense node-feature matrix.

    ``edges`` is kept canonical: each pair stored as ``u < v``, rows sorted
    lexicographically, no duplicates.
    """

    n_nodes: int
    edges: np.ndarray
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        if self.n_nodes < 1:
            raise GraphValidationError("graph must have at least one node")
        edges = _canonical_edges(self.edges, self.n_nodes)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.n_nodes:
            raise GraphValidationError(
                f"feature matrix has shape {feats.shape}, expected ({self.n_nodes}, F)"
            )
        edges.setflags(write=False)
        feats = feats.copy()
        feats.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", feats)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        if self.n_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def edge_set(self) -> set:
        return {(int(u), int(v)) for u, v in self.edges}

    def neighbors(self) -> list:
        nbrs = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            nbrs[u].append(int(v))
            nbrs[v].append(int(u))
        return nbrs

    def induced(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph on ``nodes``, reindexed in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        if self.n_edges:
            keep = (remap[self.edges[:, 0]] >= 0) & (remap[self.edges[:, 1]] >= 0)
            new_edges = remap[self.edges[keep]]
        else:
            new_edges = np.zeros((0, 2), np.int64)
        return Graph(len(nodes), new_edges, self.features[nodes], self.label)

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel nodes so that old node ``perm[k]`` becomes node ``k``."""
        return self.induced(perm)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.label == other.label
            and np.array_equal(self.edges, other.edges)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    graphs: tuple
    name: str = "dataset"
    seed: int = 0

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise GraphValidationError("dataset must contain at least one graph")
        dims = {g.feature_dim for g in graphs}
        if len(dims) != 1:
            raise GraphValidationError(f"inconsistent feature dimensions {sorted(dims)}")
        object.__setattr__(self, "graphs", graphs)

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Dataset(self.graphs[idx], self.name, self.seed)
        return self.graphs[idx]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].feature_dim

    @property
    def labels(self) -> np.ndarray:
        return np.array([-1 if g.label is None else g.label for g in self.graphs])

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.graphs[i] for i in indices), self.name, self.seed)


def generate_sbm(
    n_graphs: int = 200,
    nodes_per_graph: tuple = (20, 30),
    p_in: float = 0.3,
    p_out: float = 0.05,
    n_classes: int = 2,
    feature_dim: int = 8,
    seed: int = 0,
    feature_sigma: float = 0.5,
    name: str = "sbm",
) -> Dataset:
    """Balanced synthetic dataset of stochastic-block-model graphs.

    Graphs of class ``c`` have ``c + 1`` planted blocks. Node features are
    Gaussian around the class's coordinate axis, clipped to ``[0, 1]``.
    """
    lo, hi = nodes_per_graph
    if n_graphs < 1 or n_classes < 1 or feature_dim < 1:
        raise ValueError("n_graphs, n_classes and feature_dim must be positive")
    if lo < 1 or hi < lo:
        raise ValueError(f"empty node-count range {nodes_per_graph}")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError("need 0 <= p_out < p_in <= 1")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_graphs) % n_classes
    graphs = []
    for label in labels:
        n = int(rng.integers(lo, hi + 1))
        n_blocks = min(int(label) + 1, n)
        block = np.sort(rng.integers(0, n_blocks, size=n)) if n_blocks > 1 else np.zeros(n, int)
        prob = np.where(block[:, None] == block[None, :], p_in, p_out)
        coins = rng.random((n, n))
        iu, ju = np.triu_indices(n, 1)
        hit = coins[iu, ju] < prob[iu, ju]
        edges = np.stack([iu[hit], ju[hit]], axis=1)
        mean = np.zeros(feature_dim)
        mean[int(label) % feature_dim] = 1.0
        feats = np.clip(mean + feature_sigma * rng.standard_normal((n, feature_dim)), 0.0, 1.0)
        graphs.append(Graph(n, edges, feats, int(label)))
    return Dataset(tuple(graphs), name, seed)


# --------------------------------------------------------------------------
# JSON persistence
# --------------------------------------------------------------------------


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "name": ds.name,
        "seed": ds.seed,
        "graphs": [
            {
                "n_nodes": g.n_nodes,
                "edges": g.edges.tolist(),
                "features": g.features.tolist(),
                "label": g.label,
            }
            for g in ds.graphs
        ],
    }


def dataset_from_dict(obj: dict) -> Dataset:
    try:
        raw_graphs = obj["graphs"]
        graphs = []
        for k, rec in enumerate(raw_graphs):
            try:
                n = int(rec["n_nodes"])
                feats = np.asarray(rec["features"], dtype=np.float64)
                if feats.ndim == 1 and feats.size == 0:
                    feats = feats.reshape(n, 0)
                graphs.append(Graph(n, rec.get("edges", []), feats, rec.get("label")))
            except GraphValidationError as exc:
                raise GraphValidationError(f"graph {k}: {exc}") from None
        return Dataset(tuple(graphs), str(obj.get("name", "dataset")), int(obj.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise DatasetParseError(f"malformed dataset record: {exc!r}") from None


def save_dataset(ds: Dataset, path) -> None:
    # one graph per line keeps parse errors locatable
    path = Path(path)
    lines = ["{", f'  "name": {json.dumps(ds.name)},', f'  "seed": {int(ds.seed)},', '  "graphs": [']
    records = dataset_to_dict(ds)["graphs"]
    for k, rec in enumerate(records):
        sep = "," if k < len(records) - 1 else ""
        lines.append("    " + json.dumps(rec) + sep)
    lines.append("  ]")
    lines.append("}")
    path.write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(obj, dict):
        raise DatasetParseError("top-level value must be an object", line=1)
    return dataset_from_dict(obj)
