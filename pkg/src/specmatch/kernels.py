"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``jacobi_eigh``, ``pairwise_sq_dists``, ``edge_energy``)
dispatch on :data:`specmatch._accel.USE_NUMBA`. Both variants are exported
so they can be benchmarked and cross-checked against each other.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

MAX_SWEEPS = 100


# --------------------------------------------------------------------------
# cyclic Jacobi eigensolver
# --------------------------------------------------------------------------


@njit
def _jacobi_loops(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n)
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        off = np.sqrt(2.0 * off)
        if off <= tol:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, sweeps


def _round_robin(m):
    """Pairings for a round-robin tournament on ``m`` (even) players."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_vectorized(a, tol, max_sweeps):
    # Parallel-ordered Jacobi: each round rotates n/2 disjoint pairs at once.
    n = a.shape[0]
    m = n + (n % 2)
    if m != n:
        padded = np.zeros((m, m))
        padded[:n, :n] = a
        a = padded
    v = np.eye(m)
    rounds = _round_robin(m)
    sweeps = 0
    iu = np.triu_indices(m, 1)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(a[iu] ** 2))
        if off <= tol:
            break
        sweeps += 1
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            theta = np.zeros_like(apq)
            theta[active] = (a[q, q] - a[p, p])[active] / (2.0 * apq[active])
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            t[~active] = 0.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(m)
            rot[p, p] = c
            rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            a[p, q] = 0.0
            a[q, p] = 0.0
            v = v @ rot
    w = np.diag(a)[:n].copy()
    return w, np.ascontiguousarray(v[:n, :n]), sweeps


def _finish(w, v):
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    # sign convention: largest-magnitude entry of each eigenvector is positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


def _tolerance(m, tol):
    return tol * max(1.0, float(np.linalg.norm(m)))


def jacobi_eigh_numba(m, tol=1e-12, max_sweeps=MAX_SWEEPS):
    a = np.array(m, dtype=np.float64, copy=True)
    w, v, sweeps = _jacobi_loops(a, _tolerance(m, tol), max_sweeps)
    w, v = _finish(w, v)
    return w, v, sweeps


def jacobi_eigh_numpy(m, tol=1e-12, max_sweeps=MAX_SWEEPS):
    a = np.array(m, dtype=np.float64, copy=True)
    if a.shape[0] == 1:
        return a[0].copy(), np.ones((1, 1)), 0
    w, v, sweeps = _jacobi_vectorized(a, _tolerance(m, tol), max_sweeps)
    w, v = _finish(w, v)
    return w, v, sweeps


# --------------------------------------------------------------------------
# pairwise squared distances
# --------------------------------------------------------------------------


@njit
def _pairwise_loops(z):
    n, d = z.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = z[i, k] - z[j, k]
                acc += diff * diff
            out[i, j] = acc
            out[j, i] = acc
    return out


def pairwise_sq_dists_numba(z):
    return _pairwise_loops(np.ascontiguousarray(z, dtype=np.float64))


def pairwise_sq_dists_numpy(z):
    z = np.asarray(z, dtype=np.float64)
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


# --------------------------------------------------------------------------
# weighted edge energy  sum_ij A_ij ||z_i - z_j||^2
# --------------------------------------------------------------------------


@njit
def _edge_energy_loops(a, z):
    n, d = z.shape
    total = 0.0
    for i in range(n):
        for j in range(n):
            if a[i, j] == 0.0:
                continue
            acc = 0.0
            for k in range(d):
                diff = z[i, k] - z[j, k]
                acc += diff * diff
            total += a[i, j] * acc
    return total


def edge_energy_numba(a, z):
    return _edge_energy_loops(
        np.ascontiguousarray(a, dtype=np.float64), np.ascontiguousarray(z, dtype=np.float64)
    )


def edge_energy_numpy(a, z):
    return float(np.sum(np.asarray(a, dtype=np.float64) * pairwise_sq_dists_numpy(z)))


if USE_NUMBA:
    jacobi_eigh = jacobi_eigh_numba
    pairwise_sq_dists = pairwise_sq_dists_numba
    edge_energy = edge_energy_numba
else:
    jacobi_eigh = jacobi_eigh_numpy
    pairwise_sq_dists = pairwise_sq_dists_numpy
    edge_energy = edge_energy_numpy
