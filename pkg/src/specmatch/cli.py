"""Command line entry point: ``specmatch gen|train|fig3|sweep|verify``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .encoder import EncoderParams
from .graph import load_dataset, save_dataset
from .runner import TrainConfig, rows_to_csv, run_fig3, sweep, train
from .verify import HarnessConfig, format_table, reports_to_json, run_harness

DATASET_FILE = "dataset.jsonl"
CHECKPOINT_FILE = "checkpoint.json"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file mirroring TrainConfig")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--p", type=float, dest="percentile")
    p.add_argument("--tau", type=float)
    p.add_argument("--adjacency", choices=("binary", "soft"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--dataset", type=Path, help="dataset file (default: <out>/dataset.jsonl if present)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the seeded SBM dataset")
    _common(p)

    p = sub.add_parser("train", help="train an encoder; writes runlog.csv and checkpoint.json")
    _common(p)

    p = sub.add_parser("fig3", help="alignment/uniformity trajectories with and without the spectral term")
    _common(p)

    p = sub.add_parser("sweep", help="one training run per parameter value")
    _common(p)
    p.add_argument("--param", required=True, choices=("p", "beta", "lr", "tau"))
    p.add_argument("--values", required=True, type=lambda s: [float(v) for v in s.split(",")])

    p = sub.add_parser("verify", help="run the bound-verification harness")
    _common(p)
    p.add_argument("--t-d", type=float, default=1.0, dest="t_d")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--ensembles", type=int)
    p.add_argument("--draws", type=int)
    return parser


def load_config(args) -> TrainConfig:
    cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
    changes = {}
    for key, name in (("seed", "seed"), ("beta", "beta"), ("percentile", "percentile"),
                      ("tau", "tau"), ("adjacency", "adjacency_mode"), ("epochs", "epochs")):
        value = getattr(args, key)
        if value is not None:
            changes[name] = value
    return cfg.replace(**changes) if changes else cfg


def resolve_dataset(args, cfg: TrainConfig):
    path = args.dataset
    if path is None and (args.out / DATASET_FILE).exists():
        path = args.out / DATASET_FILE
    return load_dataset(path) if path is not None else cfg.dataset.build()


def cmd_gen(args, cfg: TrainConfig) -> int:
    spec = cfg.dataset
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    path = args.dataset or args.out / DATASET_FILE
    ds = spec.build()
    save_dataset(ds, path)
    print(f"wrote {len(ds)} graphs to {path}")
    return 0


def cmd_train(args, cfg: TrainConfig) -> int:
    params, runlog = train(cfg, resolve_dataset(args, cfg))
    runlog.write_csv(args.out / "runlog.csv")
    params.save(args.out / CHECKPOINT_FILE)
    (args.out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")
    print(json.dumps(runlog.final()))
    return 0


def cmd_fig3(args, cfg: TrainConfig) -> int:
    beta = args.beta if args.beta is not None else 0.5
    result = run_fig3(cfg, beta, resolve_dataset(args, cfg))
    (args.out / "fig3.svg").write_text(result.svg())
    (args.out / "fig3.csv").write_text(result.trajectory_csv())
    summary = result.final_comparison()
    (args.out / "fig3.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(json.dumps(summary))
    return 0


def cmd_sweep(args, cfg: TrainConfig) -> int:
    rows = sweep(args.param, args.values, cfg, resolve_dataset(args, cfg))
    text = rows_to_csv(rows)
    (args.out / f"sweep_{args.param}.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_verify(args, cfg: TrainConfig) -> int:
    ds = resolve_dataset(args, cfg)
    ckpt = args.checkpoint
    if ckpt is None and (args.out / CHECKPOINT_FILE).exists():
        ckpt = args.out / CHECKPOINT_FILE
    if ckpt is not None:
        params = EncoderParams.load(ckpt)
    else:
        logging.getLogger(__name__).warning("no checkpoint; ensembles use an untrained encoder")
        params = EncoderParams.init(ds.feature_dim, cfg.hidden, cfg.out_dim, cfg.n_layers, cfg.seed)
    hc = HarnessConfig(
        seed=cfg.seed,
        t_d=args.t_d,
        percentile=cfg.loss.percentile,
        t_unif=cfg.t_unif,
        policy=cfg.policy,
        strength=cfg.strength,
    )
    if args.tau is not None:
        hc = dataclasses.replace(hc, lipschitz_taus=(args.tau,), thm42_taus=(args.tau,))
    if args.ensembles is not None:
        hc = dataclasses.replace(hc, ensembles=args.ensembles)
    if args.draws is not None:
        hc = dataclasses.replace(hc, ensemble_draws=args.draws)
    reports = run_harness(hc, ds, params)
    (args.out / "reports.json").write_text(reports_to_json(reports) + "\n")
    print(format_table(reports))
    return 1 if any(r.status == "fail" for r in reports) else 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "fig3": cmd_fig3, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](args, load_config(args))


if __name__ == "__main__":
    sys.exit(main())
