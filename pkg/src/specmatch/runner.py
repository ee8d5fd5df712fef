"""Training loop, paired runs with and without the spectral term, and parameter sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy, graph_rng, sample_views
from .autodiff import Tape
from .encoder import EncoderParams, GraphBatch, backward, embed, encode, normalize_rows
from .graph import Dataset, generate_sbm, load_dataset
from .loss import LossConfig, total_loss
from .metrics import alignment_loss, linear_probe, pooled_uniformity

log = logging.getLogger(__name__)

RUNLOG_HEADER = ["epoch", "loss_c", "loss_g", "loss_total", "align", "unif", "probe_acc", "seconds"]

# stream keys for derived generators, kept clear of epoch numbers
EVAL_STREAM = 1_000_003
SPLIT_STREAM = 1_000_033


@dataclass
class DatasetSpec:
    path: str | None = None
    n_graphs: int = 200
    nodes_min: int = 20
    nodes_max: int = 30
    p_in: float = 0.3
    p_out: float = 0.05
    n_classes: int = 2
    feature_dim: int = 8
    seed: int = 0

    def build(self) -> Dataset:
        if self.path:
            return load_dataset(self.path)
        return generate_sbm(
            self.n_graphs,
            (self.nodes_min, self.nodes_max),
            self.p_in,
            self.p_out,
            self.n_classes,
            self.feature_dim,
            self.seed,
        )


@dataclass
class TrainConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    policy: str = "biochem"
    strength: float = 0.2
    n_layers: int = 3
    hidden: int = 32
    out_dim: int = 32
    loss: LossConfig = field(default_factory=LossConfig)
    lr: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 40
    seed: int = 0
    metric_cadence: int = 2
    alpha: float = 2.0
    t_unif: float = 2.0
    log_wall_time: bool = False

    def __post_init__(self):
        if isinstance(self.dataset, dict):
            self.dataset = DatasetSpec(**self.dataset)
        if isinstance(self.loss, dict):
            self.loss = LossConfig(**self.loss)
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.metric_cadence < 1:
            raise ValueError("metric_cadence must be at least 1")

    def augment_policy(self) -> AugmentPolicy:
        return AugmentPolicy.preset(self.policy, self.strength)

    def replace(self, **changes) -> "TrainConfig":
        loss_keys = {f.name for f in dataclasses.fields(LossConfig)}
        loss_changes = {k: changes.pop(k) for k in list(changes) if k in loss_keys}
        cfg = dataclasses.replace(self, **changes)
        if loss_changes:
            cfg = dataclasses.replace(cfg, loss=dataclasses.replace(cfg.loss, **loss_changes))
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class RunLog:
    rows: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RUNLOG_HEADER)
        for row in self.rows:
            writer.writerow([row["epoch"]] + [repr(float(row[k])) for k in RUNLOG_HEADER[1:]])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def final(self) -> dict:
        return self.rows[-1]

    def column(self, key) -> np.ndarray:
        return np.array([row[key] for row in self.rows])


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, params, runlog):
        super().__init__(f"non-finite loss in epoch {epoch}")
        self.epoch = epoch
        self.params = params
        self.runlog = runlog


class Adam:
    def __init__(self, params: EncoderParams, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.t = 0

    def step(self, params: EncoderParams, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m = self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            v = self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params.arrays[k] = params.arrays[k] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --------------------------------------------------------------------------
# batching
# --------------------------------------------------------------------------


def epoch_batches(n_graphs: int, batch_size: int, seed: int, epoch: int) -> list:
    """Seeded shuffle split into batches; a trailing singleton joins the previous batch."""
    order = np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(n_graphs)
    batches = [order[i : i + batch_size] for i in range(0, n_graphs, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def batch_views(dataset: Dataset, indices, policy: AugmentPolicy, seed: int, stream: int):
    first, second = [], []
    for idx in indices:
        a, b = sample_views(dataset[int(idx)], policy, graph_rng(seed, stream, int(idx)))
        first.append(a)
        second.append(b)
    return GraphBatch(first), GraphBatch(second)


def batch_objective(params: EncoderParams, views, loss_cfg: LossConfig):
    """Tape-free loss parts for one batch of view pairs."""
    b1, b2 = views
    z1 = normalize_rows(encode(params, b1).data)
    z2 = normalize_rows(encode(params, b2).data)
    return total_loss(z1, z2, loss_cfg)


def epoch_objective(params: EncoderParams, dataset: Dataset, config: TrainConfig, epoch: int):
    """Mean (L_C, L_G, L) over an epoch's batches, recomputed from its seeds."""
    policy = config.augment_policy()
    parts = []
    for idx in epoch_batches(len(dataset), config.batch_size, config.seed, epoch):
        res = batch_objective(params, batch_views(dataset, idx, policy, config.seed, epoch), config.loss)
        parts.append((res.contrastive, res.spectral, res.total))
    return tuple(float(x) for x in np.mean(parts, axis=0))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


class Evaluator:
    """Fixed evaluation views and probe split for one dataset and seed."""

    def __init__(self, dataset: Dataset, config: TrainConfig):
        self.dataset = dataset
        self.config = config
        policy = config.augment_policy()
        idx = np.arange(len(dataset))
        self.views = batch_views(dataset, idx, policy, config.seed, EVAL_STREAM)
        self.full = GraphBatch(list(dataset.graphs))
        perm = np.random.default_rng(np.random.SeedSequence([config.seed, SPLIT_STREAM])).permutation(
            len(dataset)
        )
        n_train = int(round(0.8 * len(dataset)))
        self.train_idx = np.sort(perm[:n_train])
        self.test_idx = np.sort(perm[n_train:])
        self.labels = dataset.labels

    def embeddings(self, params: EncoderParams):
        z1 = normalize_rows(encode(params, self.views[0]).data)
        z2 = normalize_rows(encode(params, self.views[1]).data)
        return z1, z2

    def __call__(self, params: EncoderParams) -> dict:
        z1, z2 = self.embeddings(params)
        _, readout = encode(params, self.full, return_readout=True)
        feats = readout.data
        if len(self.test_idx) and len(np.unique(self.labels)) > 1:
            acc = linear_probe(
                feats[self.train_idx],
                self.labels[self.train_idx],
                feats[self.test_idx],
                self.labels[self.test_idx],
            )
        else:
            acc = float("nan")
        return {
            "align": alignment_loss(z1, z2, self.config.alpha),
            "unif": pooled_uniformity(z1, z2, self.config.t_unif),
            "probe_acc": acc,
        }


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def init_params(config: TrainConfig, feature_dim: int) -> EncoderParams:
    return EncoderParams.init(feature_dim, config.hidden, config.out_dim, config.n_layers, config.seed)


def train(config: TrainConfig, dataset: Dataset | None = None, keep_checkpoints=False):
    """Train the encoder; returns ``(params, runlog)``.

    Logged losses at each cadence epoch are the mean batch objective of that
    epoch's batches evaluated at the end-of-epoch parameters, so they can be
    recomputed from a checkpoint and the seeds alone.
    """
    dataset = dataset if dataset is not None else config.dataset.build()
    params = init_params(config, dataset.feature_dim)
    opt = Adam(params, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    policy = config.augment_policy()
    evaluator = Evaluator(dataset, config)
    runlog = RunLog()
    start = time.perf_counter()
    last_good = params.copy()
    for epoch in range(1, config.epochs + 1):
        for idx in epoch_batches(len(dataset), config.batch_size, config.seed, epoch):
            b1, b2 = batch_views(dataset, idx, policy, config.seed, epoch)
            tape = Tape()
            bound = params.bind(tape)
            z1 = normalize_rows(encode(bound, b1, tape))
            z2 = normalize_rows(encode(bound, b2, tape))
            loss, parts = total_loss(z1, z2, config.loss)
            if not math.isfinite(parts.total):
                raise TrainingDiverged(epoch, last_good, runlog)
            grads = backward(tape, loss, bound)
            opt.step(params, grads)
        last_good = params.copy()
        if epoch % config.metric_cadence == 0 or epoch == config.epochs:
            lc, lg, lt = epoch_objective(params, dataset, config, epoch)
            if not all(map(math.isfinite, (lc, lg, lt))):
                raise TrainingDiverged(epoch, last_good, runlog)
            row = {"epoch": epoch, "loss_c": lc, "loss_g": lg, "loss_total": lt}
            row.update(evaluator(params))
            row["seconds"] = time.perf_counter() - start if config.log_wall_time else 0.0
            runlog.rows.append(row)
            if keep_checkpoints:
                runlog.checkpoints[epoch] = params.copy()
            log.info(
                "epoch %d  L=%.4f  L_C=%.4f  L_G=%.4f  align=%.4f  unif=%.4f  acc=%.3f",
                epoch, lt, lc, lg, row["align"], row["unif"], row["probe_acc"],
            )
    return params, runlog


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass
class Fig3Result:
    baseline: RunLog
    spectral: RunLog
    beta: float

    def final_comparison(self) -> dict:
        b, s = self.baseline.final(), self.spectral.final()
        return {
            "beta": self.beta,
            "align_baseline": b["align"],
            "align_spectral": s["align"],
            "unif_baseline": b["unif"],
            "unif_spectral": s["unif"],
            "probe_baseline": b["probe_acc"],
            "probe_spectral": s["probe_acc"],
            "both_not_worse": s["align"] <= b["align"] and s["unif"] <= b["unif"],
        }

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "align_beta0", "unif_beta0", "align_beta", "unif_beta"])
        for rb, rs in zip(self.baseline.rows, self.spectral.rows):
            writer.writerow(
                [rb["epoch"], repr(rb["align"]), repr(rb["unif"]), repr(rs["align"]), repr(rs["unif"])]
            )
        return buf.getvalue()

    def svg(self) -> str:
        return trajectory_svg(
            {
                "beta = 0": self.baseline,
                f"beta = {self.beta:g}": self.spectral,
            }
        )


def run_fig3(config: TrainConfig, beta: float = 0.5, dataset: Dataset | None = None) -> Fig3Result:
    """Train the same seed and data order with and without the spectral term."""
    dataset = dataset if dataset is not None else config.dataset.build()
    _, base = train(config.replace(beta=0.0), dataset)
    _, spec = train(config.replace(beta=beta), dataset)
    return Fig3Result(base, spec, beta)


SWEEP_PARAMS = {"p": "percentile", "beta": "beta", "lr": "lr", "tau": "tau"}


def sweep(parameter: str, values, config: TrainConfig, dataset: Dataset | None = None) -> list:
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {sorted(SWEEP_PARAMS)}")
    dataset = dataset if dataset is not None else config.dataset.build()
    key = SWEEP_PARAMS[parameter]
    rows = []
    for value in values:
        _, runlog = train(config.replace(**{key: value}), dataset)
        final = runlog.final()
        rows.append(
            {
                parameter: value,
                "probe_acc": final["probe_acc"],
                "loss_c": final["loss_c"],
                "loss_g": final["loss_g"],
                "loss_total": final["loss_total"],
                "align": final["align"],
                "unif": final["unif"],
            }
        )
    return rows


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def trajectory_svg(runs: dict, width=560, height=420) -> str:
    """Alignment (x) versus uniformity (y) trajectories with epoch labels."""
    pad = 60
    xs = np.concatenate([r.column("align") for r in runs.values()])
    ys = np.concatenate([r.column("unif") for r in runs.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 20}" text-anchor="middle">L_align (lower is better)</text>',
        f'<text x="18" y="{height / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {height / 2})">L_unif (lower is better)</text>',
        f'<text x="{pad}" y="{height - pad + 14}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 14}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{y1:.3g}</text>',
    ]
    for k, (label, runlog) in enumerate(runs.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = [(px(r["align"]), py(r["unif"]), r["epoch"]) for r in runlog.rows]
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y, _ in pts)
        parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y, epoch in pts:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
            parts.append(f'<text x="{x + 4:.2f}" y="{y - 4:.2f}" fill="{color}">{epoch}</text>')
        parts.append(
            f'<text x="{width - pad - 90}" y="{pad + 14 * k}" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
