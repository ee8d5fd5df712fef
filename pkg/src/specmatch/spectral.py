"""Symmetric eigendecomposition and the spectral quantities built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

ZERO_TOL = 1e-8


class NoSpectralGapError(ValueError):
    pass


class DegenerateGraphError(ValueError):
    pass


@dataclass
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def eigh(m, symmetry_tol: float = 1e-9) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition, eigenvalues ascending."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > symmetry_tol:
        raise ValueError("matrix is not symmetric")
    w, v, sweeps = kernels.jacobi_eigh(0.5 * (m + m.T))
    return EigenDecomposition(w, v, sweeps)


def heat_kernel(lap, t_d: float = 1.0, decomposition: EigenDecomposition | None = None) -> np.ndarray:
    """``exp(-t_d L)`` through the eigendecomposition of ``L``."""
    if not t_d > 0:
        raise ValueError(f"diffusion scale must be positive, got {t_d}")
    eig = decomposition if decomposition is not None else eigh(lap)
    p = (eig.vectors * np.exp(-t_d * eig.values)) @ eig.vectors.T
    return 0.5 * (p + p.T)


def lambda2(lap, zero_tol: float = ZERO_TOL, values=None) -> float:
    """Smallest eigenvalue strictly above ``zero_tol``."""
    w = eigh(lap).values if values is None else np.asarray(values)
    nonzero = w[w > zero_tol]
    if nonzero.size == 0:
        raise NoSpectralGapError("no eigenvalue above the zero tolerance")
    return float(nonzero[0])


def zero_multiplicity(values, zero_tol: float = ZERO_TOL) -> int:
    return int(np.sum(np.abs(values) <= zero_tol))


def degree_weighted_mean(z, degrees):
    """``mu = sum_i d_i z_i / sum_k d_k`` and its squared norm."""
    z = np.asarray(z, dtype=np.float64)
    d = np.asarray(degrees, dtype=np.float64)
    total = d.sum()
    if not total > 0:
        raise DegenerateGraphError("all degrees are zero")
    mu = (d @ z) / total
    return mu, float(mu @ mu)


def estimate_c(z1, z2, p1, p2, eps: float = 1e-12) -> float:
    """Tightest constant with ``sum ||z1_i - z2_i||^2 <= c ||P1 - P2||_F^2``."""
    denom = float(np.sum((np.asarray(p1) - np.asarray(p2)) ** 2))
    if denom <= eps:
        raise DegenerateGraphError("heat kernels coincide; the constant is undefined")
    diff = np.asarray(z1, dtype=np.float64) - np.asarray(z2, dtype=np.float64)
    return float(np.sum(diff * diff)) / denom


@dataclass
class SpectralSummary:
    P: np.ndarray
    lambda2: float | None
    mu: np.ndarray
    mu_norm_sq: float
    c_hat: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.c_hat is None


def summarize(lap, z, degrees, t_d: float = 1.0) -> SpectralSummary:
    eig = eigh(lap)
    try:
        gap = lambda2(lap, values=eig.values)
    except NoSpectralGapError:
        gap = None
    mu, mu_sq = degree_weighted_mean(z, degrees)
    return SpectralSummary(heat_kernel(lap, t_d, eig), gap, mu, mu_sq)
