import math

import numpy as np
import pytest

from specmatch.loss import normalized_laplacian
from specmatch.spectral import (
    DegenerateGraphError,
    NoSpectralGapError,
    degree_weighted_mean,
    eigh,
    estimate_c,
    heat_kernel,
    lambda2,
    zero_multiplicity,
)

from conftest import complete_graph, path_graph


def lap(g):
    return normalized_laplacian(g.adjacency())


def test_eigh_examples():
    np.testing.assert_allclose(eigh(np.eye(4)).values, 1.0)
    np.testing.assert_allclose(eigh(np.diag([3.0, 1.0, 2.0])).values, [1, 2, 3])
    np.testing.assert_allclose(eigh(lap(path_graph(3))).values, [0, 1, 2], atol=1e-8)


def test_eigh_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("n", [1, 2, 5, 16, 40])
def test_eigh_reconstruction_and_orthonormality(n):
    rng = np.random.default_rng(n)
    m = rng.standard_normal((n, n))
    m = m + m.T
    e = eigh(m)
    assert np.linalg.norm(e.reconstruct() - m) <= 1e-8
    assert np.linalg.norm(e.vectors.T @ e.vectors - np.eye(n)) <= 1e-8
    assert np.all(np.diff(e.values) >= 0)
    np.testing.assert_allclose(e.values, np.linalg.eigvalsh(m), atol=1e-10)


def test_eigenvector_sign_convention():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((6, 6))
    v = eigh(m + m.T).vectors
    idx = np.argmax(np.abs(v), axis=0)
    assert np.all(v[idx, np.arange(6)] > 0)


def test_heat_kernel_examples():
    np.testing.assert_allclose(heat_kernel(np.zeros((3, 3)), 1.0), np.eye(3), atol=1e-15)
    e = math.exp(-2)
    expected = [[(1 + e) / 2, (1 - e) / 2], [(1 - e) / 2, (1 + e) / 2]]
    np.testing.assert_allclose(heat_kernel(lap(complete_graph(2)), 1.0), expected, atol=1e-12)
    with pytest.raises(ValueError):
        heat_kernel(np.eye(2), 0.0)


def test_heat_kernel_spectral_mapping():
    rng = np.random.default_rng(1)
    a = (rng.random((8, 8)) < 0.4).astype(float)
    a = np.triu(a, 1)
    l = normalized_laplacian(a + a.T)
    p = heat_kernel(l, 0.7)
    np.testing.assert_allclose(
        np.sort(np.linalg.eigvalsh(p)), np.sort(np.exp(-0.7 * np.linalg.eigvalsh(l))), atol=1e-8
    )
    assert np.linalg.norm(p, 2) <= 1 + 1e-9


def test_lambda2_examples():
    assert lambda2(lap(complete_graph(3))) == pytest.approx(1.5, abs=1e-8)
    assert lambda2(lap(path_graph(3))) == pytest.approx(1.0, abs=1e-8)
    assert lambda2(lap(complete_graph(2))) == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(NoSpectralGapError):
        lambda2(np.zeros((3, 3)))


def test_zero_multiplicity_counts_components():
    a = np.zeros((5, 5))
    a[0, 1] = a[1, 0] = a[2, 3] = a[3, 2] = 1
    assert zero_multiplicity(eigh(normalized_laplacian(a)).values) == 2


def test_degree_weighted_mean_examples():
    z = np.tile([0.6, 0.8], (4, 1))
    mu, sq = degree_weighted_mean(z, [1, 2, 3, 4])
    np.testing.assert_allclose(mu, [0.6, 0.8])
    assert sq == pytest.approx(1.0)
    mu, sq = degree_weighted_mean(np.eye(3)[:2], [1, 1])
    np.testing.assert_allclose(mu, [0.5, 0.5, 0])
    assert sq == pytest.approx(0.5)
    e = np.eye(3)
    mu, _ = degree_weighted_mean(np.stack([e[0], e[1], e[0]]), [1, 2, 1])
    np.testing.assert_allclose(mu, [0.5, 0.5, 0])
    with pytest.raises(DegenerateGraphError):
        degree_weighted_mean(e, [0, 0, 0])


def test_estimate_c():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((3, 2))
    p = heat_kernel(lap(path_graph(3)))
    with pytest.raises(DegenerateGraphError):
        estimate_c(z, z, p, p)
    q = heat_kernel(lap(complete_graph(3)))
    assert estimate_c(z, z, p, q) == 0.0
    z2 = z + 0.1 * rng.standard_normal((3, 2))
    c = estimate_c(z, z2, p, q)
    assert c * np.sum((p - q) ** 2) == pytest.approx(np.sum((z - z2) ** 2), rel=1e-10)
