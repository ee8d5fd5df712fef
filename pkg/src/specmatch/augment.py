"""Stochastic graph augmentations used to build positive pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph

OPERATORS = ("node_drop", "edge_perturb", "attr_mask", "subgraph")

PRESETS = {
    "biochem": ("node_drop", "subgraph"),
    "social-dense": ("node_drop", "edge_perturb", "attr_mask", "subgraph"),
    "social-sparse": ("node_drop", "edge_perturb", "subgraph"),
}


@dataclass(frozen=True)
class AugmentPolicy:
    operators: tuple = PRESETS["biochem"]
    strength: float = 0.2

    def __post_init__(self):
        ops = tuple(self.operators)
        if not ops:
            raise ValueError("augmentation policy needs at least one operator")
        unknown = set(ops) - set(OPERATORS)
        if unknown:
            raise ValueError(f"unknown augmentation operators: {sorted(unknown)}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength must lie in [0, 1], got {self.strength}")
        object.__setattr__(self, "operators", ops)

    @classmethod
    def preset(cls, name: str, strength: float = 0.2) -> "AugmentPolicy":
        try:
            return cls(PRESETS[name], strength)
        except KeyError:
            raise ValueError(f"unknown policy preset {name!r}; choose from {sorted(PRESETS)}") from None


def node_drop(g: Graph, strength: float, rng: np.random.Generator) -> Graph:
    k = min(math.floor(strength * g.n_nodes), g.n_nodes - 1)
    if k <= 0:
        return g
    dropped = rng.choice(g.n_nodes, size=k, replace=False)
    keep = np.setdiff1d(np.arange(g.n_nodes), dropped)
    return g.induced(keep)


def edge_perturb(g: Graph, strength: float, rng: np.random.Generator) -> Graph:
    """``floor(strength * |E|)`` edits, each a deletion or an addition with equal odds.

    Deletions draw distinct existing edges and additions draw distinct absent
    pairs of the input graph; when one kind runs out the remaining edits
    fall to the other.
    """
    k = math.floor(strength * g.n_edges)
    if k <= 0:
        return g
    n = g.n_nodes
    present = np.zeros((n, n), dtype=bool)
    present[g.edges[:, 0], g.edges[:, 1]] = True
    iu, ju = np.triu_indices(n, 1)
    existing = np.flatnonzero(present[iu, ju])
    absent = np.flatnonzero(~present[iu, ju])
    n_del = int(np.sum(rng.random(k) < 0.5))
    n_del = min(max(n_del, k - len(absent)), len(existing))
    n_add = min(k - n_del, len(absent))
    flip = np.concatenate(
        [rng.choice(existing, size=n_del, replace=False), rng.choice(absent, size=n_add, replace=False)]
    )
    present[iu[flip], ju[flip]] = ~present[iu[flip], ju[flip]]
    edges = np.stack(np.nonzero(present), axis=1)
    return Graph(n, edges, g.features, g.label)


def attr_mask(g: Graph, strength: float, rng: np.random.Generator) -> Graph:
    k = math.floor(strength * g.n_nodes)
    if k <= 0:
        return g
    rows = rng.choice(g.n_nodes, size=k, replace=False)
    feats = g.features.copy()
    feats[rows] = 0.0
    return Graph(g.n_nodes, g.edges, feats, g.label)


def subgraph_sample(g: Graph, strength: float, rng: np.random.Generator) -> Graph:
    """Random-walk subgraph keeping ``ceil((1 - strength) * n)`` nodes.

    The walk gives up once ``10 * n`` consecutive steps find no new node, or
    immediately at a node with no neighbours; whatever was visited is returned.
    """
    n = g.n_nodes
    target = max(1, math.ceil((1.0 - strength) * n - 1e-9))
    nbrs = g.neighbors()
    current = int(rng.integers(n))
    visited = [current]
    seen = {current}
    idle = 0
    while len(visited) < target and idle < 10 * n:
        idle += 1
        options = nbrs[current]
        if not options:
            break
        current = options[int(rng.integers(len(options)))]
        if current not in seen:
            seen.add(current)
            visited.append(current)
            idle = 0
    if len(visited) == n:
        return g
    return g.induced(sorted(visited))


APPLY = {
    "node_drop": node_drop,
    "edge_perturb": edge_perturb,
    "attr_mask": attr_mask,
    "subgraph": subgraph_sample,
}


def apply_operator(name: str, g: Graph, strength: float, rng: np.random.Generator) -> Graph:
    return APPLY[name](g, strength, rng)


def sample_view(g: Graph, policy: AugmentPolicy, rng: np.random.Generator):
    op = policy.operators[int(rng.integers(len(policy.operators)))]
    return apply_operator(op, g, policy.strength, rng), op


def sample_views(g: Graph, policy: AugmentPolicy, rng: np.random.Generator):
    """Two independent augmented views of ``g``."""
    first, _ = sample_view(g, policy, rng)
    second, _ = sample_view(g, policy, rng)
    return first, second


def graph_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Per-graph generator derived from (dataset seed, epoch, graph index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, index]))
