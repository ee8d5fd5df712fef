"""Numerical checks of the contrastive-gap and uniformity bounds.

Each check returns a :class:`BoundReport` recording both sides of one
inequality ``lhs <= rhs``. Monte-Carlo checks fold a 3-standard-error
allowance into their tolerance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .augment import AugmentPolicy, graph_rng, sample_view
from .encoder import EncoderParams, encode, normalize_rows
from .graph import Dataset
from .loss import build_view_graph, info_nce, info_nce_terms, spec_match_loss
from .metrics import uniformity_loss
from .spectral import (
    ZERO_TOL,
    DegenerateGraphError,
    degree_weighted_mean,
    eigh,
    estimate_c,
    heat_kernel,
    zero_multiplicity,
)

MC_SIGMAS = 3.0


class InsufficientSamplesError(RuntimeError):
    pass


@dataclass
class BoundReport:
    name: str
    lhs: float
    rhs: float
    tolerance: float = 1e-9
    context: dict = field(default_factory=dict)
    status: str = ""

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        if not self.status:
            self.status = "pass" if self.slack >= -self.tolerance else "fail"

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["slack"] = self.slack
        out["passed"] = self.passed
        return out

    @classmethod
    def skipped(cls, name, reason, context=None) -> "BoundReport":
        ctx = dict(context or {})
        ctx["reason"] = reason
        return cls(name, float("nan"), float("nan"), context=ctx, status="skipped")


# --------------------------------------------------------------------------
# contrastive-gap bound and its ingredients
# --------------------------------------------------------------------------


def verify_duhamel(l1, l2, t_d: float, context=None) -> BoundReport:
    """``||exp(-t L1) - exp(-t L2)||_F <= t ||L1 - L2||_F``."""
    p1 = heat_kernel(l1, t_d)
    p2 = heat_kernel(l2, t_d)
    lhs = np.linalg.norm(p1 - p2)
    rhs = t_d * np.linalg.norm(np.asarray(l1) - np.asarray(l2))
    return BoundReport("duhamel", lhs, rhs, 1e-9, {"t_d": t_d, **(context or {})})


def verify_cosine_identity(z1, z2, context=None) -> BoundReport:
    """``s(z1_i, z2_i) = 1 - ||z1_i - z2_i||^2 / 2`` on unit rows."""
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    s = np.sum(z1 * z2, axis=1)
    err = np.max(np.abs(s - (1.0 - 0.5 * np.sum((z1 - z2) ** 2, axis=1))))
    return BoundReport("cosine_identity", err, 0.0, 1e-12, dict(context or {}))


def verify_lipschitz(z1, z2, tau: float, grid=None, h: float = 1e-5, context=None) -> BoundReport:
    """Largest central-difference slope of each ``l_i^(v)`` in its positive similarity."""
    grid = np.linspace(-1.0, 1.0, 41) if grid is None else np.asarray(grid)
    worst = 0.0
    most_positive = -np.inf
    for s in grid:
        slope = (info_nce_terms(z1, z2, tau, s + h) - info_nce_terms(z1, z2, tau, s - h)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(slope))))
        most_positive = max(most_positive, float(np.max(slope)))
    ctx = {"tau": tau, "max_slope": most_positive, **(context or {})}
    return BoundReport("lipschitz", worst, 1.0 / tau, 1e-6, ctx)


def perfect_alignment_loss(z1, z2, tau: float) -> float:
    """Contrastive loss with every positive similarity set to 1, negatives unchanged."""
    return float(np.sum(info_nce_terms(z1, z2, tau, positive=1.0)))


def verify_theorem_4_2(z1, z2, tau: float, t_d: float = 1.0, percentile: float = 80.0, context=None):
    """``|L_C - L_C*| <= t_d^2 c / tau * L_G`` with the batch's tightest ``c``."""
    ctx = {"tau": tau, "t_d": t_d, "p": percentile, "N": len(z1), **(context or {})}
    vg1 = build_view_graph(z1, percentile, "binary")
    vg2 = build_view_graph(z2, percentile, "binary")
    p1 = heat_kernel(vg1.L, t_d)
    p2 = heat_kernel(vg2.L, t_d)
    try:
        c = estimate_c(z1, z2, p1, p2)
    except DegenerateGraphError as exc:
        return BoundReport.skipped("contrastive_gap", str(exc), ctx)
    lg = spec_match_loss(vg1.L, vg2.L)
    gap = abs(info_nce(z1, z2, tau) - perfect_alignment_loss(z1, z2, tau))
    ctx["c_hat"] = c
    ctx["loss_g"] = lg
    return BoundReport("contrastive_gap", gap, t_d**2 * c / tau * lg, 1e-9, ctx)


# --------------------------------------------------------------------------
# augmentation ensembles
# --------------------------------------------------------------------------


@dataclass
class EnsembleDraw:
    Z: np.ndarray
    A: np.ndarray
    D: np.ndarray
    L: np.ndarray
    eigenvalues: np.ndarray
    mu_norm_sq: float
    unif: float

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])


@dataclass
class EnsembleStats:
    draws: list
    n_discarded: int
    L_bar: np.ndarray
    lambda2_bar: float
    lg_mean: float
    lg_se: float
    lg_paired_mean: float
    lg_paired_se: float
    dev_mean: float
    mu_sq_mean: float
    mu_sq_se: float
    lambda2_var: float
    unif_mean: float
    unif_se: float
    t_unif: float

    @property
    def M(self) -> int:
        return len(self.draws)

    @property
    def discard_rate(self) -> float:
        return self.n_discarded / (self.n_discarded + self.M)

    def summary(self) -> dict:
        return {
            "M": self.M,
            "discarded": self.n_discarded,
            "lambda2_bar": self.lambda2_bar,
            "E_LG": self.lg_mean,
            "E_mu_sq": self.mu_sq_mean,
            "var_lambda2": self.lambda2_var,
            "unif_mean": self.unif_mean,
        }


def is_connected(values, degrees) -> bool:
    """One zero eigenvalue and no isolated node (those carry eigenvalue 1)."""
    return zero_multiplicity(values) == 1 and bool(np.all(np.asarray(degrees) > 0))


def draw_view(graphs, policy: AugmentPolicy, params: EncoderParams, seed: int, draw: int):
    views = [sample_view(g, policy, graph_rng(seed, draw, k))[0] for k, g in enumerate(graphs)]
    return normalize_rows(encode(params, views).data)


def ensemble_from_embeddings(zs, percentile: float = 80.0, t_unif: float = 2.0, min_draws: int = 2) -> EnsembleStats:
    """Ensemble statistics from per-draw embedding matrices (one view each)."""
    draws = []
    discarded = 0
    for z in zs:
        vg = build_view_graph(z, percentile, "binary")
        w = eigh(vg.L).values
        if not is_connected(w, vg.D):
            discarded += 1
            continue
        _, mu_sq = degree_weighted_mean(z, vg.D)
        draws.append(EnsembleDraw(z, vg.A, vg.D, vg.L, w, mu_sq, uniformity_loss(z, t_unif)))
    m = len(draws)
    if m < max(2, min_draws):
        raise InsufficientSamplesError(f"only {m} connected draws ({discarded} discarded)")
    ls = np.stack([d.L for d in draws])
    l_bar = ls.mean(axis=0)
    l_bar = 0.5 * (l_bar + l_bar.T)
    lambda2_bar = float(eigh(l_bar).values[1])

    flat = ls.reshape(m, -1)
    gram = flat @ flat.T
    sq = np.diag(gram)
    pair = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    np.fill_diagonal(pair, 0.0)
    iu = np.triu_indices(m, 1)
    lg_mean = float(pair[iu].mean())
    h = pair.sum(axis=1) / (m - 1)
    lg_se = float(2.0 * h.std(ddof=1) / np.sqrt(m)) if m > 2 else float("inf")
    disjoint = pair[np.arange(0, m - 1, 2), np.arange(1, m, 2)]
    lg_paired = float(disjoint.mean())
    lg_paired_se = float(disjoint.std(ddof=1) / np.sqrt(len(disjoint))) if len(disjoint) > 1 else float("inf")
    dev = np.sum((ls - l_bar) ** 2, axis=(1, 2))

    mus = np.array([d.mu_norm_sq for d in draws])
    lam = np.array([d.lambda2 for d in draws])
    unifs = np.array([d.unif for d in draws])
    return EnsembleStats(
        draws=draws,
        n_discarded=discarded,
        L_bar=l_bar,
        lambda2_bar=lambda2_bar,
        lg_mean=lg_mean,
        lg_se=lg_se,
        lg_paired_mean=lg_paired,
        lg_paired_se=lg_paired_se,
        dev_mean=float(dev.mean()),
        mu_sq_mean=float(mus.mean()),
        mu_sq_se=float(mus.std(ddof=1) / np.sqrt(m)),
        lambda2_var=float(lam.var()),
        unif_mean=float(unifs.mean()),
        unif_se=float(unifs.std(ddof=1) / np.sqrt(m)),
        t_unif=t_unif,
    )


def build_ensemble(
    graphs,
    policy: AugmentPolicy,
    params: EncoderParams,
    M: int = 64,
    percentile: float = 80.0,
    seed: int = 0,
    t_unif: float = 2.0,
    min_draws: int = 2,
) -> EnsembleStats:
    """Monte-Carlo ensemble of view Laplacians for one batch under a frozen encoder.

    Draws whose view graph is disconnected are discarded and counted.
    """
    graphs = list(graphs.graphs if isinstance(graphs, Dataset) else graphs)
    zs = [draw_view(graphs, policy, params, seed, k) for k in range(M)]
    return ensemble_from_embeddings(zs, percentile, t_unif, min_draws)


# --------------------------------------------------------------------------
# uniformity bound and its ingredients
# --------------------------------------------------------------------------


def second_eigenvalue(m) -> float:
    return float(eigh(m).values[1])


def verify_hoffman_wielandt(l_sample, l_bar, context=None, values=None, bar_values=None) -> BoundReport:
    """``(lambda_2(L) - lambda_2(L_bar))^2 <= ||L - L_bar||_F^2`` (index-matched)."""
    w = eigh(l_sample).values if values is None else values
    wb = eigh(l_bar).values if bar_values is None else bar_values
    lhs = (w[1] - wb[1]) ** 2
    rhs = float(np.sum((np.asarray(l_sample) - np.asarray(l_bar)) ** 2))
    return BoundReport("hoffman_wielandt", lhs, rhs, 1e-9, dict(context or {}))


def verify_rayleigh_step(a, z, context=None, values=None) -> BoundReport:
    """``1/2 sum_ij A_ij ||z_i - z_j||^2 / sum_k d_k >= lambda_2 (1 - ||mu||^2)``."""
    a = np.asarray(a, dtype=np.float64)
    deg = a.sum(axis=1)
    lap = build_laplacian(a)
    w = eigh(lap).values if values is None else values
    ctx = dict(context or {})
    if not is_connected(w, deg):
        return BoundReport.skipped("rayleigh_step", "graph is disconnected", ctx)
    lhs = 0.5 * kernels.edge_energy(a, z) / deg.sum()
    _, mu_sq = degree_weighted_mean(z, deg)
    gap = float(w[w > ZERO_TOL][0])
    return BoundReport("rayleigh_step", gap * (1.0 - mu_sq), lhs, 1e-9, ctx)


def build_laplacian(a):
    from .loss import normalized_laplacian

    return normalized_laplacian(a)


def verify_chord_bound(t: float, x_grid=None) -> BoundReport:
    """``exp(-t x) <= 1 - (1 - exp(-4t)) x / 4`` on ``[0, 4]``."""
    x = np.linspace(0.0, 4.0, 41) if x_grid is None else np.asarray(x_grid)
    chord = 1.0 - (1.0 - np.exp(-4.0 * t)) / 4.0 * x
    worst = float(np.max(np.exp(-t * x) - chord))
    return BoundReport("chord_bound", worst, 0.0, 1e-12, {"t": t, "points": int(len(x))})


def uniformity_bound(stats: EnsembleStats, t: float) -> float:
    k = 1.0 - np.exp(-4.0 * t)
    mu = stats.mu_sq_mean
    return k / (2.0 * np.sqrt(2.0)) * (1.5 - mu) * np.sqrt(stats.lg_mean) - k / 2.0 * stats.lambda2_bar * (1.0 - mu)


def verify_theorem_4_3(stats: EnsembleStats, t: float | None = None, context=None) -> BoundReport:
    """Ensemble-mean uniformity against the spectral right-hand side.

    The tolerance is ``1e-6`` plus three propagated standard errors of the
    Monte-Carlo means (uniformity, ``E[L_G]`` and ``E[||mu||^2]``).
    """
    t = stats.t_unif if t is None else t
    lhs = stats.unif_mean if t == stats.t_unif else float(
        np.mean([uniformity_loss(d.Z, t) for d in stats.draws])
    )
    rhs = uniformity_bound(stats, t)
    k = 1.0 - np.exp(-4.0 * t)
    root = np.sqrt(max(stats.lg_mean, 1e-300))
    d_lg = k / (2.0 * np.sqrt(2.0)) * (1.5 - stats.mu_sq_mean) / (2.0 * root)
    d_mu = -k / (2.0 * np.sqrt(2.0)) * root + k / 2.0 * stats.lambda2_bar
    sigma = np.sqrt(stats.unif_se**2 + (d_lg * stats.lg_se) ** 2 + (d_mu * stats.mu_sq_se) ** 2)
    ctx = {"t": t, "sigma": float(sigma), **stats.summary(), **(context or {})}
    return BoundReport("uniformity_bound", lhs, rhs, 1e-6 + MC_SIGMAS * float(sigma), ctx)


def verify_variance_bound(stats: EnsembleStats, context=None) -> BoundReport:
    """``Var[lambda_2] <= E[L_G] / 2`` with a 3-sigma allowance."""
    ctx = {"M": stats.M, **(context or {})}
    return BoundReport(
        "variance_bound", stats.lambda2_var, 0.5 * stats.lg_mean, MC_SIGMAS * 0.5 * stats.lg_se, ctx
    )


def verify_iid_identity(stats: EnsembleStats, context=None) -> BoundReport:
    """Independent-pair estimate of ``E[L_G]`` against ``2 E||L - L_bar||_F^2``.

    Two-sided: reported as ``|difference| <= 0`` with a 3-sigma tolerance.
    """
    diff = abs(stats.lg_paired_mean - 2.0 * stats.dev_mean)
    ctx = {
        "paired_estimate": stats.lg_paired_mean,
        "twice_deviation": 2.0 * stats.dev_mean,
        "M": stats.M,
        **(context or {}),
    }
    return BoundReport("iid_identity", diff, 0.0, MC_SIGMAS * stats.lg_paired_se, ctx)


def draw_reports(stats: EnsembleStats, context=None) -> list:
    """Per-draw Hoffman-Wielandt and Rayleigh checks plus the ensemble-level ones."""
    ctx = dict(context or {})
    reports = []
    bar_values = eigh(stats.L_bar).values
    for k, d in enumerate(stats.draws):
        dctx = {**ctx, "draw": k}
        reports.append(verify_hoffman_wielandt(d.L, stats.L_bar, dctx, d.eigenvalues, bar_values))
        reports.append(verify_rayleigh_step(d.A, d.Z, dctx, d.eigenvalues))
    reports.append(verify_variance_bound(stats, ctx))
    reports.append(verify_iid_identity(stats, ctx))
    return reports


# --------------------------------------------------------------------------
# harness
# --------------------------------------------------------------------------


def random_view_pair(rng, n, d, noise=None):
    z1 = rng.standard_normal((n, d))
    z1 /= np.linalg.norm(z1, axis=1, keepdims=True)
    sigma = rng.uniform(0.05, 1.0) if noise is None else noise
    z2 = z1 + sigma * rng.standard_normal((n, d))
    z2 /= np.linalg.norm(z2, axis=1, keepdims=True)
    return z1, z2


@dataclass
class HarnessConfig:
    seed: int = 0
    duhamel_pairs: int = 200
    duhamel_n: int = 16
    duhamel_t: tuple = (0.5, 1.0, 2.0)
    lipschitz_taus: tuple = (0.2, 0.5, 1.0)
    lipschitz_batches: int = 5
    thm42_batches: int = 100
    thm42_n: int = 32
    thm42_d: int = 8
    thm42_taus: tuple = (0.2, 0.5, 1.0)
    t_d: float = 1.0
    percentile: float = 80.0
    ensembles: int = 50
    ensemble_batch: int = 32
    ensemble_draws: int = 64
    min_connected: int = 8
    chord_ts: tuple = (0.5, 2.0)
    t_unif: float = 2.0
    policy: str = "biochem"
    strength: float = 0.2


def lemma_reports(cfg: HarnessConfig) -> list:
    reports = []
    for k in range(cfg.duhamel_pairs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, k]))
        z1, z2 = random_view_pair(rng, cfg.duhamel_n, cfg.thm42_d)
        l1 = build_view_graph(z1, cfg.percentile, "binary").L
        l2 = build_view_graph(z2, cfg.percentile, "binary").L
        for t_d in cfg.duhamel_t:
            reports.append(verify_duhamel(l1, l2, t_d, {"pair": k, "seed": cfg.seed}))
    for tau in cfg.lipschitz_taus:
        for k in range(cfg.lipschitz_batches):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, k]))
            z1, z2 = random_view_pair(rng, cfg.thm42_n, cfg.thm42_d)
            reports.append(verify_lipschitz(z1, z2, tau, context={"batch": k, "seed": cfg.seed}))
            reports.append(verify_cosine_identity(z1, z2, {"batch": k, "seed": cfg.seed}))
    return reports


def contrastive_gap_reports(cfg: HarnessConfig) -> list:
    reports = []
    for k in range(cfg.thm42_batches):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 3, k]))
        z1, z2 = random_view_pair(rng, cfg.thm42_n, cfg.thm42_d)
        for tau in cfg.thm42_taus:
            reports.append(
                verify_theorem_4_2(z1, z2, tau, cfg.t_d, cfg.percentile, {"batch": k, "seed": cfg.seed})
            )
    return reports


def ensemble_reports(cfg: HarnessConfig, dataset: Dataset, params: EncoderParams) -> list:
    """Eigenvalue-perturbation and uniformity-bound checks over seeded batches of ``dataset``."""
    policy = AugmentPolicy.preset(cfg.policy, cfg.strength)
    reports = [verify_chord_bound(t) for t in cfg.chord_ts]
    n = len(dataset)
    for e in range(cfg.ensembles):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 4, e]))
        idx = np.sort(rng.choice(n, size=min(cfg.ensemble_batch, n), replace=False))
        draw_seed = int(rng.integers(2**31))
        ctx = {"ensemble": e, "seed": cfg.seed, "draw_seed": draw_seed}
        try:
            stats = build_ensemble(
                [dataset[int(i)] for i in idx],
                policy,
                params,
                cfg.ensemble_draws,
                cfg.percentile,
                seed=draw_seed,
                t_unif=cfg.t_unif,
                min_draws=cfg.min_connected,
            )
        except InsufficientSamplesError as exc:
            reports.append(BoundReport.skipped("uniformity_bound", str(exc), ctx))
            continue
        reports.extend(draw_reports(stats, ctx))
        reports.append(verify_theorem_4_3(stats, cfg.t_unif, ctx))
    return reports


def run_harness(cfg: HarnessConfig, dataset: Dataset, params: EncoderParams) -> list:
    return lemma_reports(cfg) + contrastive_gap_reports(cfg) + ensemble_reports(cfg, dataset, params)


def summarize_reports(reports) -> list:
    """One row per check name: counts and the smallest slack seen."""
    rows = {}
    for r in reports:
        row = rows.setdefault(r.name, {"name": r.name, "checks": 0, "passed": 0, "failed": 0, "skipped": 0,
                                       "min_slack": float("inf")})
        row["checks"] += 1
        if r.status == "skipped":
            row["skipped"] += 1
            continue
        row["passed" if r.passed else "failed"] += 1
        row["min_slack"] = min(row["min_slack"], r.slack)
    return list(rows.values())


def format_table(reports) -> str:
    lines = [f"{'check':<18} {'n':>5} {'pass':>5} {'fail':>5} {'skip':>5} {'min slack':>12}"]
    for row in summarize_reports(reports):
        lines.append(
            f"{row['name']:<18} {row['checks']:>5} {row['passed']:>5} {row['failed']:>5} "
            f"{row['skipped']:>5} {row['min_slack']:>12.4g}"
        )
    for r in reports:
        if r.status == "fail":
            lines.append(f"FAIL {r.name}: slack={r.slack:.3g} context={json.dumps(r.context, default=float)}")
    return "\n".join(lines)


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, default=float)
