"""Acceptance criteria, one test each, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from specmatch.loss import info_nce, normalized_laplacian
from specmatch.runner import TrainConfig, run_fig3
from specmatch.spectral import eigh, lambda2
from specmatch.verify import HarnessConfig, lemma_reports, ensemble_reports, contrastive_gap_reports

from conftest import complete_graph, gradient_check, path_graph


@pytest.fixture
def announce(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        return ok

    return emit


def test_1_eigensolver(announce):
    start = time.perf_counter()
    p3 = eigh(normalized_laplacian(path_graph(3).adjacency())).values
    p3_err = float(np.max(np.abs(p3 - [0.0, 1.0, 2.0])))
    k3_err = abs(lambda2(normalized_laplacian(complete_graph(3).adjacency())) - 1.5)
    rng = np.random.default_rng(0)
    recon = 0.0
    for _ in range(100):
        m = rng.standard_normal((16, 16))
        m = m + m.T
        recon = max(recon, float(np.linalg.norm(eigh(m).reconstruct() - m)))
    elapsed = time.perf_counter() - start
    ok = p3_err <= 1e-8 and k3_err <= 1e-8 and recon <= 1e-8 and elapsed < 5
    announce(1, ok, f"P3 err {p3_err:.1e}, K3 err {k3_err:.1e}, worst reconstruction {recon:.1e}, {elapsed:.2f}s")
    assert ok


def test_2_gradients(announce, sbm):
    start = time.perf_counter()
    worst = gradient_check(sbm, n_graphs=8, per_layer=20, h=1e-5)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 30
    announce(2, ok, f"worst relative error {worst:.2e} over 20 coordinates x 4 layer groups, {elapsed:.2f}s")
    assert ok


def test_3_info_nce_oracles(announce):
    z1 = np.array([[0.6, 0.8]])
    single = info_nce(z1, z1, 0.3)
    same = np.tile([[1.0, 0.0]], (2, 1))
    identical = info_nce(same, same, 1.0)
    ortho = info_nce(np.eye(2), np.eye(2), 1.0)
    e1 = abs(identical - 4 * math.log(3))
    e2 = abs(ortho - 4 * math.log(1 + 2 / math.e))
    ok = single == 0.0 and e1 <= 1e-10 and e2 <= 1e-10
    announce(3, ok, f"N=1 -> {single}, 4 ln 3 err {e1:.1e}, 4 ln(1+2/e) err {e2:.1e}")
    assert ok


def test_4_contrastive_lemmas(announce):
    start = time.perf_counter()
    reports = lemma_reports(HarnessConfig())
    elapsed = time.perf_counter() - start
    by = {name: [r for r in reports if r.name == name] for name in ("duhamel", "lipschitz", "cosine_identity")}
    duh_slack = min(r.slack for r in by["duhamel"])
    lip = max(r.lhs - r.rhs for r in by["lipschitz"])
    cos = max(r.lhs for r in by["cosine_identity"])
    taus = sorted({r.context["tau"] for r in by["lipschitz"]})
    ok = (
        len(by["duhamel"]) == 600
        and duh_slack >= -1e-9
        and lip <= 1e-6
        and taus == [0.2, 0.5, 1.0]
        and cos <= 1e-12
        and elapsed < 60
    )
    announce(
        4,
        ok,
        f"duhamel min slack {duh_slack:.3g} (600 checks), max(|dl/ds| - 1/tau) {lip:.2e}, "
        f"cosine identity err {cos:.1e}, {elapsed:.1f}s",
    )
    assert ok


def test_5_contrastive_gap(announce):
    reports = contrastive_gap_reports(HarnessConfig())
    failed = [r for r in reports if r.status == "fail"]
    skipped = [r for r in reports if r.status == "skipped"]
    batches = {r.context["batch"] for r in reports}
    ok = not failed and not skipped and len(batches) == 100
    announce(
        5,
        ok,
        f"{len(reports)} checks on {len(batches)} batches, {len(failed)} failed, {len(skipped)} skipped, "
        f"min slack {min(r.slack for r in reports if r.status != 'skipped'):.3g}",
    )
    assert ok


@pytest.fixture(scope="module")
def ensemble_run(sbm, trained):
    params, _ = trained
    start = time.perf_counter()
    reports = ensemble_reports(HarnessConfig(ensembles=50, ensemble_draws=64), sbm, params)
    return reports, time.perf_counter() - start


def test_6_spectral_lemmas(announce, ensemble_run):
    reports, elapsed = ensemble_run
    names = ("hoffman_wielandt", "rayleigh_step", "chord_bound", "variance_bound", "iid_identity")
    rows = {n: [r for r in reports if r.name == n] for n in names}
    failed = [r for n in names for r in rows[n] if r.status == "fail"]
    chord_points = {r.context["points"] for r in rows["chord_bound"]}
    ok = not failed and all(rows[n] for n in names) and chord_points == {41} and elapsed < 180
    counts = ", ".join(f"{n} {len(rows[n])}" for n in names)
    announce(6, ok, f"{counts}; {len(failed)} failed; {elapsed:.1f}s")
    for r in failed:
        print(f"  {r.name} slack={r.slack:.3g} {json.dumps(r.context, default=float)}")
    assert ok


def test_7_uniformity_bound(announce, ensemble_run):
    reports, _ = ensemble_run
    checks = [r for r in reports if r.name == "uniformity_bound"]
    connected = [r for r in checks if r.status != "skipped"]
    failed = [r for r in connected if r.status == "fail"]
    ok = len(connected) == 50 and not failed
    worst = min(r.slack for r in connected) if connected else float("nan")
    announce(7, ok, f"{len(connected)} connected ensembles (t=2), {len(failed)} failed, min slack {worst:.3g}")
    assert ok


def test_8_alignment_uniformity_trend(announce, sbm):
    start = time.perf_counter()
    wins = 0
    probes = []
    lines = []
    for seed in range(5):
        cfg = TrainConfig(epochs=20, seed=seed, alpha=2.0, t_unif=2.0)
        c = run_fig3(cfg, 0.5, sbm).final_comparison()
        wins += c["both_not_worse"]
        probes.append((c["probe_baseline"], c["probe_spectral"]))
        lines.append(
            f"  seed {seed}: align {c['align_baseline']:.4f} -> {c['align_spectral']:.4f}, "
            f"unif {c['unif_baseline']:.4f} -> {c['unif_spectral']:.4f}"
        )
    elapsed = time.perf_counter() - start
    base_acc, spec_acc = np.mean(probes, axis=0)
    ok = wins >= 4 and spec_acc >= base_acc - 0.02 and elapsed < 600
    announce(
        8,
        ok,
        f"beta=0.5 no worse on both metrics in {wins}/5 seeds (need 4), "
        f"probe {base_acc:.3f} -> {spec_acc:.3f}, {elapsed:.1f}s",
    )
    print("\n".join(lines))
    assert ok


def run_pipeline(workdir, config):
    cli = [sys.executable, "-m", "specmatch.cli"]
    out = workdir / "out"
    for cmd in ("gen", "train", "verify"):
        proc = subprocess.run(cli + [cmd, "--config", str(config), "--out", str(out)], capture_output=True, text=True)
        if proc.returncode != 0:
            return proc.returncode, cmd, proc.stdout + proc.stderr, out
    return 0, None, proc.stdout, out


def test_9_cli_round_trip(announce, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"epochs": 20, "seed": 0}))
    results = []
    for run in ("a", "b"):
        (tmp_path / run).mkdir()
        results.append(run_pipeline(tmp_path / run, config))
    codes = [r[0] for r in results]
    same = all(c == 0 for c in codes) and (results[0][3] / "runlog.csv").read_bytes() == (
        results[1][3] / "runlog.csv"
    ).read_bytes()
    ok = same and codes == [0, 0]
    detail = "runlog.csv byte-identical across runs, verify exit 0" if ok else f"exit codes {codes}"
    announce(9, ok, detail)
    if not ok:
        for code, cmd, text, _ in results:
            if code:
                print(f"  {cmd} failed:\n{text[-2000:]}")
    assert ok
