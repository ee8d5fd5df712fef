"""Contrastive loss, view graphs, and the spectral graph-matching loss.

Every function here accepts plain ndarrays. :func:`total_loss` additionally
accepts taped :class:`~specmatch.autodiff.Tensor` embeddings and then builds
the objective out of differentiable primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ADJACENCY_MODES = ("binary", "soft")


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.2
    beta: float = 0.5
    percentile: float = 80.0
    adjacency_mode: str = "soft"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not 0 < self.percentile <= 100:
            raise ValueError(f"percentile must lie in (0, 100], got {self.percentile}")
        if self.adjacency_mode not in ADJACENCY_MODES:
            raise ValueError(f"adjacency_mode must be one of {ADJACENCY_MODES}")


@dataclass
class ViewGraph:
    S: np.ndarray
    theta: float
    A: np.ndarray
    W: np.ndarray
    D: np.ndarray
    L: np.ndarray

    def to_dict(self) -> dict:
        return {
            "S": self.S.tolist(),
            "theta": float(self.theta),
            "A": self.A.tolist(),
            "D": self.D.tolist(),
            "L": self.L.tolist(),
        }


# --------------------------------------------------------------------------
# view graph construction
# --------------------------------------------------------------------------


def similarity_matrix(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    s = z @ z.T
    return 0.5 * (s + s.T)


def percentile_threshold(s, p: float) -> float:
    """Nearest-rank ``p``-th percentile of the strict upper-triangle entries."""
    s = np.asarray(s)
    n = s.shape[0]
    if n < 2:
        raise ValueError("percentile threshold needs at least two rows")
    if not 0 < p <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {p}")
    values = np.sort(s[np.triu_indices(n, 1)])
    m = len(values)
    rank = max(1, math.ceil(round(p * m / 100.0, 9)))
    return float(values[rank - 1])


def adjacency(s, theta: float):
    """Binary adjacency ``S > theta`` (off-diagonal) and clamped soft weights."""
    s = np.asarray(s, dtype=np.float64)
    a = (s > theta).astype(np.float64)
    np.fill_diagonal(a, 0.0)
    w = np.maximum(s * a, 0.0)
    return a, w


def normalized_laplacian(w) -> np.ndarray:
    """``I - D^-1/2 W D^-1/2`` with zero-degree nodes given identity rows."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("normalized Laplacian needs non-negative weights")
    deg = w.sum(axis=1)
    dinv = np.zeros_like(deg)
    pos = deg > 0
    dinv[pos] = deg[pos] ** -0.5
    lap = np.eye(len(deg)) - dinv[:, None] * w * dinv[None, :]
    return 0.5 * (lap + lap.T)


def build_view_graph(z, percentile: float = 80.0, mode: str = "binary", mask=None) -> ViewGraph:
    s = similarity_matrix(z)
    theta = percentile_threshold(s, percentile)
    a, w = adjacency(s, theta)
    if mask is not None:
        a = np.asarray(mask, dtype=np.float64)
        w = np.maximum(s * a, 0.0)
    weights = a if mode == "binary" else w
    return ViewGraph(s, theta, a, w, weights.sum(axis=1), normalized_laplacian(weights))


def spec_match_loss(l1, l2) -> float:
    diff = np.asarray(l1, dtype=np.float64) - np.asarray(l2, dtype=np.float64)
    return float(np.sum(diff * diff))


# --------------------------------------------------------------------------
# InfoNCE
# --------------------------------------------------------------------------


def _positive_index(n):
    rows = np.arange(2 * n)
    return rows, np.concatenate([np.arange(n, 2 * n), np.arange(n)])


def info_nce_terms(z1, z2, tau: float, positive=None) -> np.ndarray:
    """Per-anchor losses ``l_i^(v)`` ordered view 1 then view 2.

    ``positive`` overrides every positive-pair similarity (numerator and its
    denominator copy) while the remaining similarities are left untouched.
    """
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = np.vstack([np.asarray(z1, dtype=np.float64), np.asarray(z2, dtype=np.float64)])
    n = len(z1)
    sims = z @ z.T
    rows, cols = _positive_index(n)
    if positive is not None:
        sims[rows, cols] = positive
    logits = sims / tau
    np.fill_diagonal(logits, -np.inf)
    m = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    return lse - logits[rows, cols]


def info_nce(z1, z2, tau: float) -> float:
    return float(np.sum(info_nce_terms(z1, z2, tau)))


def info_nce_tensor(z1: Tensor, z2: Tensor, tau: float) -> Tensor:
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    n = z1.data.shape[0]
    z = ad.concat([z1, z2], axis=0)
    logits = (z @ z.T) * (1.0 / tau)
    lse = ad.logsumexp(logits, axis=1, mask=~np.eye(2 * n, dtype=bool))
    pos = ad.take(logits, _positive_index(n))
    return (lse - pos).sum()


def _laplacian_tensor(z: Tensor, mask: np.ndarray) -> Tensor:
    n = z.data.shape[0]
    s = z @ z.T
    w = ad.relu(s * mask)
    dinv = ad.inv_sqrt_or_zero(w.sum(axis=1))
    scaled = w * ad.reshape(dinv, (n, 1)) * ad.reshape(dinv, (1, n))
    return ad.neg(scaled) + np.eye(n)


# --------------------------------------------------------------------------
# combined objective
# --------------------------------------------------------------------------


@dataclass
class LossParts:
    total: float
    contrastive: float
    spectral: float
    views: tuple


def total_loss(z1, z2, config: LossConfig, masks=None):
    """``L_C + beta * L_G`` for one batch.

    With taped tensors returns ``(loss_tensor, LossParts)``; with arrays
    returns a :class:`LossParts`. ``masks`` pins the two adjacency masks
    instead of thresholding (used by gradient checks).
    """
    taped = isinstance(z1, Tensor)
    d1 = z1.data if taped else np.asarray(z1, dtype=np.float64)
    d2 = z2.data if taped else np.asarray(z2, dtype=np.float64)
    m1, m2 = (None, None) if masks is None else masks
    vg1 = build_view_graph(d1, config.percentile, config.adjacency_mode, m1)
    vg2 = build_view_graph(d2, config.percentile, config.adjacency_mode, m2)
    if not taped:
        lc = info_nce(d1, d2, config.tau)
        lg = spec_match_loss(vg1.L, vg2.L)
        return LossParts(lc + config.beta * lg, lc, lg, (vg1, vg2))

    lc_t = info_nce_tensor(z1, z2, config.tau)
    if config.adjacency_mode == "soft" and config.beta != 0.0:
        diff = _laplacian_tensor(z1, vg1.A) - _laplacian_tensor(z2, vg2.A)
        lg_t = (diff * diff).sum()
        loss = lc_t + lg_t * config.beta
        lg = float(lg_t.data)
    else:
        lg = spec_match_loss(vg1.L, vg2.L)
        loss = lc_t + config.beta * lg
    parts = LossParts(float(loss.data), float(lc_t.data), lg, (vg1, vg2))
    return loss, parts
