"""GIN encoder with sum readout and a two-layer projection head."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import DegenerateEmbeddingError, Tape, Tensor
from .graph import Graph

__all__ = [
    "DegenerateEmbeddingError",
    "EncoderParams",
    "GraphBatch",
    "backward",
    "encode",
    "gin_forward",
    "normalize_rows",
]


@dataclass
class EncoderParams:
    """Named float64 arrays; weights are stored ``(fan_in, fan_out)``."""

    arrays: dict
    in_dim: int
    hidden: int = 32
    out_dim: int = 32
    n_layers: int = 3

    @classmethod
    def init(cls, in_dim, hidden=32, out_dim=32, n_layers=3, seed=0) -> "EncoderParams":
        rng = np.random.default_rng(seed)

        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        arrays = {}
        width = in_dim
        for layer in range(n_layers):
            arrays[f"gin{layer}.eps"] = np.zeros(1)
            arrays[f"gin{layer}.w1"] = uniform(width, (width, hidden))
            arrays[f"gin{layer}.b1"] = uniform(width, (hidden,))
            arrays[f"gin{layer}.w2"] = uniform(hidden, (hidden, hidden))
            arrays[f"gin{layer}.b2"] = uniform(hidden, (hidden,))
            width = hidden
        arrays["head.w1"] = uniform(hidden, (hidden, hidden))
        arrays["head.b1"] = uniform(hidden, (hidden,))
        arrays["head.w2"] = uniform(hidden, (hidden, out_dim))
        arrays["head.b2"] = uniform(hidden, (out_dim,))
        return cls(arrays, in_dim, hidden, out_dim, n_layers)

    def names(self):
        return list(self.arrays)

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            {k: v.copy() for k, v in self.arrays.items()},
            self.in_dim,
            self.hidden,
            self.out_dim,
            self.n_layers,
        )

    def bind(self, tape: Tape) -> dict:
        """Leaf tensors on ``tape`` for every parameter array."""
        return {k: tape.leaf(v, name=k) for k, v in self.arrays.items()}

    def layer_groups(self) -> dict:
        """Parameter names grouped by layer prefix (``gin0``, ..., ``head``)."""
        groups = {}
        for name in self.arrays:
            groups.setdefault(name.split(".")[0], []).append(name)
        return groups

    def allclose(self, other, atol=0.0) -> bool:
        return self.arrays.keys() == other.arrays.keys() and all(
            np.allclose(self.arrays[k], other.arrays[k], rtol=0.0, atol=atol) for k in self.arrays
        )

    def to_dict(self) -> dict:
        return {
            "format": "specmatch-encoder/1",
            "config": {
                "in_dim": self.in_dim,
                "hidden": self.hidden,
                "out_dim": self.out_dim,
                "n_layers": self.n_layers,
            },
            "shapes": {k: list(v.shape) for k, v in self.arrays.items()},
            "params": {k: v.ravel().tolist() for k, v in self.arrays.items()},
        }

    @classmethod
    def from_dict(cls, obj) -> "EncoderParams":
        cfg = obj["config"]
        arrays = {}
        for name, shape in obj["shapes"].items():
            flat = np.asarray(obj["params"][name], dtype=np.float64)
            if flat.size != int(np.prod(shape)):
                raise ValueError(f"parameter {name}: {flat.size} values for shape {shape}")
            arrays[name] = flat.reshape(shape)
        return cls(arrays, cfg["in_dim"], cfg["hidden"], cfg["out_dim"], cfg["n_layers"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "EncoderParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


class GraphBatch:
    """Disjoint union of graphs: stacked features, block adjacency, pooling map."""

    def __init__(self, graphs: Sequence[Graph]):
        if not graphs:
            raise ValueError("empty graph batch")
        sizes = np.array([g.n_nodes for g in graphs])
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        total = int(sizes.sum())
        self.n_graphs = len(graphs)
        self.n_nodes = total
        self.features = np.vstack([g.features for g in graphs])
        rows, cols = [], []
        for g, off in zip(graphs, offsets):
            if g.n_edges:
                rows.append(g.edges[:, 0] + off)
                cols.append(g.edges[:, 1] + off)
        if rows:
            r = np.concatenate(rows)
            c = np.concatenate(cols)
            data = np.ones(2 * len(r))
            self.adjacency = sp.csr_matrix(
                (data, (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(total, total)
            )
        else:
            self.adjacency = sp.csr_matrix((total, total))
        owner = np.repeat(np.arange(self.n_graphs), sizes)
        self.pool = sp.csr_matrix(
            (np.ones(total), (owner, np.arange(total))), shape=(self.n_graphs, total)
        )


def _param_tensors(params, tape):
    if isinstance(params, EncoderParams):
        if tape is None:
            return {k: Tensor(v) for k, v in params.arrays.items()}, params
        return params.bind(tape), params
    return params, None


def encode(params, graphs, tape: Tape | None = None, return_readout=False):
    """Unnormalised projections ``g(READOUT(h^(L)))`` for a batch of graphs.

    ``params`` is either an :class:`EncoderParams` (bound to ``tape`` on the
    fly) or a dict of already-bound leaf tensors.
    """
    batch = graphs if isinstance(graphs, GraphBatch) else GraphBatch(list(graphs))
    p, raw = _param_tensors(params, tape)
    n_layers = sum(1 for k in p if k.endswith(".eps"))
    in_dim = p["gin0.w1"].data.shape[0]
    if batch.features.shape[1] != in_dim:
        raise ValueError(f"feature dim {batch.features.shape[1]} does not match encoder input {in_dim}")
    h = Tensor(batch.features, tape=tape)
    for layer in range(n_layers):
        pre = f"gin{layer}."
        agg = ad.spmm(batch.adjacency, h)
        h = h * (p[pre + "eps"] + 1.0) + agg
        h = ad.relu(h @ p[pre + "w1"] + p[pre + "b1"])
        h = ad.relu(h @ p[pre + "w2"] + p[pre + "b2"])
    readout = ad.spmm(batch.pool, h)
    hidden = ad.relu(readout @ p["head.w1"] + p["head.b1"])
    z = hidden @ p["head.w2"] + p["head.b2"]
    if return_readout:
        return z, readout
    return z


def gin_forward(params, g: Graph, tape: Tape | None = None) -> Tensor:
    """Projection of a single graph (a length-d tensor)."""
    return encode(params, [g], tape)[0]


def normalize_rows(z):
    """Unit-normalise rows; accepts an ndarray or a taped :class:`Tensor`."""
    if isinstance(z, Tensor):
        return ad.row_normalize(z)
    return ad.row_normalize(Tensor(z)).data


def backward(tape: Tape, loss: Tensor, bound: dict, seed=1.0) -> dict:
    """Gradient of ``loss`` for every bound parameter (zeros if unused)."""
    tape.backward(loss, seed)
    return {k: (np.zeros_like(t.data) if t.grad is None else t.grad) for k, t in bound.items()}


def embed(params: EncoderParams, graphs, batch_size=256, readout=False) -> np.ndarray:
    """Tape-free embeddings (normalised projections, or raw readouts)."""
    out = []
    graphs = list(graphs)
    for start in range(0, len(graphs), batch_size):
        z, r = encode(params, graphs[start : start + batch_size], return_readout=True)
        out.append(r.data if readout else normalize_rows(z.data))
    return np.vstack(out)
