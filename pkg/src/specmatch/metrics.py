"""Alignment / uniformity functionals and a linear probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .kernels import pairwise_sq_dists


@dataclass(frozen=True)
class MetricConfig:
    alpha: float = 2.0
    t_unif: float = 2.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.t_unif > 0):
            raise ValueError("alpha and t_unif must be positive")


def alignment_loss(z1, z2, alpha: float = 2.0) -> float:
    """Mean of ``||z1_i - z2_i||^alpha`` over positive pairs."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    diff = np.asarray(z1, dtype=np.float64) - np.asarray(z2, dtype=np.float64)
    return float(np.mean(np.sqrt(np.sum(diff * diff, axis=1)) ** alpha))


def uniformity_loss(z, t: float = 2.0) -> float:
    """Log of the mean Gaussian potential over distinct row pairs."""
    z = np.asarray(z, dtype=np.float64)
    n = len(z)
    if n < 2:
        raise ValueError("uniformity needs at least two embeddings")
    if not t > 0:
        raise ValueError("t must be positive")
    d2 = pairwise_sq_dists(z)[np.triu_indices(n, 1)]
    return float(logsumexp(-t * d2) - np.log(d2.size))


def pooled_uniformity(z1, z2, t: float = 2.0) -> float:
    return uniformity_loss(np.vstack([z1, z2]), t)


def linear_probe(
    train_x,
    train_y,
    test_x,
    test_y,
    steps: int = 500,
    lr: float = 0.1,
    l2: float = 1e-4,
) -> float:
    """Test accuracy of softmax regression fitted by full-batch gradient descent.

    Features are standardised with training statistics; weights start at zero.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    test_x = np.asarray(test_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    test_y = np.asarray(test_y)
    classes = np.unique(np.concatenate([train_y, test_y]))
    yi = np.searchsorted(classes, train_y)
    mean = train_x.mean(axis=0)
    std = train_x.std(axis=0)
    std[std < 1e-12] = 1.0
    xs = (train_x - mean) / std
    xt = (test_x - mean) / std
    n, f = xs.shape
    k = len(classes)
    w = np.zeros((f, k))
    b = np.zeros(k)
    onehot = np.eye(k)[yi]
    for _ in range(steps):
        logits = xs @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        prob = np.exp(logits)
        prob /= prob.sum(axis=1, keepdims=True)
        err = (prob - onehot) / n
        w -= lr * (xs.T @ err + l2 * w)
        b -= lr * err.sum(axis=0)
    pred = classes[np.argmax(xt @ w + b, axis=1)]
    return float(np.mean(pred == test_y))
