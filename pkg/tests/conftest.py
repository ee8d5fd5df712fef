import numpy as np
import pytest

from specmatch import autodiff as ad
from specmatch.augment import AugmentPolicy
from specmatch.encoder import EncoderParams, backward, encode, normalize_rows
from specmatch.autodiff import Tape
from specmatch.graph import Graph, generate_sbm
from specmatch.loss import LossConfig, total_loss
from specmatch.runner import TrainConfig, batch_views, train


def path_graph(n, dim=2):
    edges = [(i, i + 1) for i in range(n - 1)]
    return Graph(n, edges, np.ones((n, dim)))


def complete_graph(n, dim=2):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return Graph(n, edges, np.ones((n, dim)))


def unit_rows(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@pytest.fixture(scope="session")
def sbm():
    return generate_sbm(seed=0)


@pytest.fixture(scope="session")
def small_sbm():
    return generate_sbm(n_graphs=16, nodes_per_graph=(8, 12), seed=3)


@pytest.fixture(scope="session")
def trained(sbm):
    """Encoder after 20 epochs on the default SBM dataset."""
    params, runlog = train(TrainConfig(epochs=20), sbm)
    return params, runlog


def gradient_check(dataset, n_graphs, per_layer, seed=0, h=1e-5, beta=0.5):
    """Worst relative error of taped gradients against central differences.

    Adjacency masks are frozen at the unperturbed point so the finite
    differences never cross a threshold. Coordinates whose +-h evaluations
    flip any ReLU are redrawn: the objective has a kink inside the stencil
    there and central differences are meaningless.
    """
    rng = np.random.default_rng(seed)
    params = EncoderParams.init(dataset.feature_dim, 32, 32, 3, seed=seed)
    idx = np.arange(n_graphs)
    views = batch_views(dataset, idx, AugmentPolicy.preset("biochem", 0.2), seed, 1)
    cfg = LossConfig(beta=beta, adjacency_mode="soft")

    tape = Tape()
    bound = params.bind(tape)
    z1 = normalize_rows(encode(bound, views[0], tape))
    z2 = normalize_rows(encode(bound, views[1], tape))
    loss, parts = total_loss(z1, z2, cfg)
    masks = (parts.views[0].A, parts.views[1].A)
    grads = backward(tape, loss, bound)

    def value(p):
        pattern = []
        relu = ad.relu

        def tracing_relu(x):
            pattern.append(x.data > 0)
            return relu(x)

        ad.relu = tracing_relu
        try:
            a = normalize_rows(encode(p, views[0]).data)
            b = normalize_rows(encode(p, views[1]).data)
        finally:
            ad.relu = relu
        return total_loss(a, b, cfg, masks=masks).total, pattern

    def same(p, q):
        return all(np.array_equal(x, y) for x, y in zip(p, q))

    _, base_pattern = value(params)
    worst = 0.0
    for names in params.layer_groups().values():
        checked = 0
        while checked < per_layer:
            name = names[rng.integers(len(names))]
            arr = params.arrays[name]
            k = int(rng.integers(arr.size))
            plus, minus = params.copy(), params.copy()
            plus.arrays[name].flat[k] += h
            minus.arrays[name].flat[k] -= h
            (f_plus, pat_plus), (f_minus, pat_minus) = value(plus), value(minus)
            if not same(pat_plus, base_pattern) or not same(pat_minus, base_pattern):
                continue
            checked += 1
            fd = (f_plus - f_minus) / (2 * h)
            an = grads[name].flat[k]
            err = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
            worst = max(worst, err)
    return worst
