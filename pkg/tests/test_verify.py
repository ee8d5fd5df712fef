import math

import numpy as np
import pytest

from specmatch.augment import AugmentPolicy
from specmatch.encoder import EncoderParams
from specmatch.loss import build_view_graph
from specmatch.verify import (
    BoundReport,
    HarnessConfig,
    InsufficientSamplesError,
    lemma_reports,
    build_ensemble,
    ensemble_from_embeddings,
    format_table,
    random_view_pair,
    reports_to_json,
    contrastive_gap_reports,
    uniformity_bound,
    verify_chord_bound,
    verify_cosine_identity,
    verify_duhamel,
    verify_hoffman_wielandt,
    verify_lipschitz,
    verify_rayleigh_step,
    verify_theorem_4_2,
    verify_theorem_4_3,
)

from conftest import unit_rows


def test_report_status_follows_slack():
    assert BoundReport("x", 1.0, 1.0 - 1e-10, tolerance=1e-9).passed
    bad = BoundReport("x", 1.0, 0.5, tolerance=1e-9)
    assert not bad.passed and bad.status == "fail"
    assert bad.slack == -0.5
    skipped = BoundReport.skipped("x", "why")
    assert skipped.passed and skipped.status == "skipped"


def test_duhamel_examples():
    l = np.eye(4)
    r = verify_duhamel(l, l, 1.0)
    assert r.lhs == 0 and r.rhs == 0 and r.passed
    n = 5
    r = verify_duhamel(np.zeros((n, n)), np.eye(n), 1.0)
    assert r.lhs == pytest.approx(math.sqrt(n) * (1 - math.exp(-1)), rel=1e-10)
    assert r.rhs == pytest.approx(math.sqrt(n))


def test_contrastive_gap_identical_views_skipped():
    z = unit_rows(np.random.default_rng(0), 10, 4)
    r = verify_theorem_4_2(z, z, 0.5)
    assert r.status == "skipped"


def test_contrastive_gap_rhs_scales_with_inverse_tau():
    z1, z2 = random_view_pair(np.random.default_rng(1), 32, 8)
    a = verify_theorem_4_2(z1, z2, 1.0)
    b = verify_theorem_4_2(z1, z2, 0.5)
    assert b.rhs == pytest.approx(2 * a.rhs, rel=1e-12)


def test_hoffman_wielandt_examples():
    l = np.diag([0.0, 1.0, 2.0])
    r = verify_hoffman_wielandt(l, l)
    assert r.lhs == 0 and r.rhs == 0
    r = verify_hoffman_wielandt(l, np.diag([0.0, 1.5, 2.0]))
    assert r.lhs == pytest.approx(0.25) and r.rhs == pytest.approx(0.25) and r.passed


def test_rayleigh_examples():
    k2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    r = verify_rayleigh_step(k2, np.eye(2))
    assert r.rhs == pytest.approx(1.0) and r.lhs == pytest.approx(1.0) and r.passed
    p3 = np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]])
    r = verify_rayleigh_step(p3, np.tile([[0.6, 0.8]], (3, 1)))
    assert r.rhs == 0 and abs(r.lhs) < 1e-15 and r.passed


def test_rayleigh_disconnected_skipped():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1
    assert verify_rayleigh_step(a, np.eye(3)).status == "skipped"


def test_chord_bound():
    for t in (0.5, 2.0):
        r = verify_chord_bound(t)
        assert r.passed and r.lhs == pytest.approx(0.0, abs=1e-15)
    r = verify_chord_bound(2.0, [2.0])
    assert r.lhs == pytest.approx(math.exp(-4) - (1 - (1 - math.exp(-8)) / 2))


def test_lipschitz():
    z1, z2 = random_view_pair(np.random.default_rng(2), 16, 4)
    r = verify_lipschitz(z1, z2, 1.0)
    assert r.passed and r.lhs <= 1.000001
    assert r.context["max_slope"] <= 0
    assert verify_lipschitz(z1, z2, 0.2).rhs == pytest.approx(5.0)


def test_cosine_identity():
    z1, z2 = random_view_pair(np.random.default_rng(3), 20, 6)
    assert verify_cosine_identity(z1, z2).passed


def ensemble_embeddings(seed, m, n=12, d=4):
    rng = np.random.default_rng(seed)
    base = unit_rows(rng, n, d)
    out = []
    for _ in range(m):
        z = base + 0.3 * rng.standard_normal((n, d))
        out.append(z / np.linalg.norm(z, axis=1, keepdims=True))
    return out


def test_identical_draws():
    z = ensemble_embeddings(0, 1)[0]
    stats = ensemble_from_embeddings([z, z], percentile=60)
    assert stats.lg_mean == 0.0
    stats = ensemble_from_embeddings([z] * 5, percentile=60)
    np.testing.assert_allclose(stats.L_bar, build_view_graph(z, 60).L, atol=1e-15)
    assert stats.lambda2_var == pytest.approx(0.0, abs=1e-28)
    report = verify_theorem_4_3(stats)
    assert report.rhs == pytest.approx(-(1 - math.exp(-8)) / 2 * stats.lambda2_bar * (1 - stats.mu_sq_mean))
    assert report.passed


def test_uniformity_bound_vanishes_as_t_goes_to_zero():
    stats = ensemble_from_embeddings(ensemble_embeddings(1, 16), percentile=60)
    assert abs(uniformity_bound(stats, 1e-9)) < 1e-7
    assert verify_theorem_4_3(stats, 1e-9).passed


def test_ensemble_statistics_identities():
    stats = ensemble_from_embeddings(ensemble_embeddings(2, 20), percentile=60)
    assert np.array_equal(stats.L_bar, stats.L_bar.T)
    m = stats.M
    # all-pairs mean of ||Li - Lj||^2 is exactly 2M/(M-1) times the mean deviation
    assert stats.lg_mean == pytest.approx(2 * m / (m - 1) * stats.dev_mean, rel=1e-10)
    assert stats.lg_mean >= 0


def test_insufficient_samples():
    z = unit_rows(np.random.default_rng(4), 12, 3)
    z[:6] = z[0]
    z[6:] = z[6]
    with pytest.raises(InsufficientSamplesError):
        ensemble_from_embeddings([z, z, z], percentile=50)


def test_build_ensemble_deterministic_policy(small_sbm):
    params = EncoderParams.init(small_sbm.feature_dim, seed=0)
    policy = AugmentPolicy(("attr_mask",), 0.0)
    stats = build_ensemble(small_sbm.graphs[:10], policy, params, M=4, percentile=50)
    assert stats.M + stats.n_discarded == 4
    for d in stats.draws:
        np.testing.assert_allclose(d.L, stats.L_bar, atol=1e-15)


def test_build_ensemble_on_trained_encoder(sbm, trained):
    params, _ = trained
    policy = AugmentPolicy.preset("biochem", 0.2)
    stats = build_ensemble(sbm.graphs[:32], policy, params, M=64, seed=11)
    assert stats.M >= 32
    assert np.array_equal(stats.L_bar, stats.L_bar.T)
    assert stats.lg_mean >= 0 and 0 <= stats.discard_rate < 0.5
    assert verify_theorem_4_3(stats).passed


def test_lemma_and_gap_harness_small():
    cfg = HarnessConfig(duhamel_pairs=10, lipschitz_batches=1, thm42_batches=5)
    reports = lemma_reports(cfg) + contrastive_gap_reports(cfg)
    assert all(r.passed for r in reports)
    assert len([r for r in reports if r.name == "duhamel"]) == 30


def test_failure_is_reported_with_context():
    r = BoundReport("duhamel", 2.0, 1.0, context={"pair": 3, "seed": 9})
    text = format_table([r])
    assert "FAIL duhamel" in text and '"seed": 9' in text and "slack=-1" in text
    assert '"passed": false' in reports_to_json([r])
