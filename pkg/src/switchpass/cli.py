"""Command-line entry point.

Commands: train, eval, sweep-beta, ablate-placement, gen-data. All outputs
land under the config's output_dir with stable filenames. Exit codes:
0 success, 2 usage or config error, 3 training divergence, 4 file format
error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import data as dat
from . import evaluation as ev
from . import routing, training
from .autograd import Tensor
from .config import RunConfig, load_run_config
from .errors import ConfigError, FormatError, TrainingError
from .training import format_float

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_FORMAT = 4
EXIT_IO = 5


def _load(config_path: str, seed_override: int | None) -> RunConfig:
    run = load_run_config(config_path)
    if seed_override is not None:
        run.train_cfg = replace(run.train_cfg, seed=seed_override)
        run.train_cfg.data.spec = replace(run.train_cfg.data.spec, seed=seed_override)
    return run


def _write_summary(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    run = _load(args.config, args.seed)
    out = run.output_dir
    os.makedirs(out, exist_ok=True)
    result = training.train(run.train_cfg)

    training.write_metrics_csv(result.metrics, os.path.join(out, "metrics.csv"))
    for ckpt in result.checkpoints:
        training.save_checkpoint(ckpt, os.path.join(out, f"checkpoint_epoch_{ckpt.epoch:04d}.json"))
    training.save_checkpoint(result.checkpoints[-1], os.path.join(out, "checkpoint_final.json"))

    if len(result.checkpoints) >= 2 and result.dataset.calibrate:
        points = ev.calibration_progress(run.train_cfg, result.checkpoints,
                                         result.dataset.calibrate)
        ev.write_calibration_csv(points, os.path.join(out, "calibration.csv"),
                                 os.path.join(out, "calibration_scatter.csv"))

    final = result.metrics[-1] if result.metrics else {}
    _write_summary(os.path.join(out, "summary.json"), {
        "command": "train",
        "epochs": run.train_cfg.epochs,
        "seed": run.train_cfg.seed,
        "checkpoints": len(result.checkpoints),
        "final_metrics": final,
    })
    return EXIT_OK


def _resolve_tau(run: RunConfig, args, model, dataset) -> float:
    if args.tau is not None:
        return args.tau
    fraction = args.target_light_fraction
    if fraction is None:
        if run.tau is not None:
            return run.tau
        fraction = run.target_light_fraction if run.target_light_fraction is not None else 0.6
    preds = model.switch_predictions(Tensor(dat.frames_to_matrix(dataset.calibrate)))
    return routing.calibrate_threshold(preds, fraction)


def cmd_eval(args) -> int:
    run = _load(args.config, args.seed)
    out = run.output_dir
    os.makedirs(out, exist_ok=True)
    ckpt = training.load_checkpoint(args.checkpoint)
    model = training.restore_model(run.train_cfg, ckpt)
    dataset = training.build_dataset(run.train_cfg.data)

    tau = _resolve_tau(run, args, model, dataset)
    report = ev.routing_stats(model, dataset.test, tau)
    ev.write_routing_csv(report, os.path.join(out, "routing.csv"))

    parity = {"overall": ev.quality_parity(model, dataset.test, tau)}
    for tag in (dat.EASY, dat.HARD):
        frames = [f for f in dataset.test if f.difficulty == tag]
        if frames:
            parity[tag] = ev.quality_parity(model, frames, tau)
    ev.write_parity_csv(parity, os.path.join(out, "parity.csv"))

    probe = ev.downstream_probe(model, dataset, tau)
    ev.write_probe_csv(probe, os.path.join(out, "probe.csv"))

    _write_summary(os.path.join(out, "summary.json"), {
        "command": "eval",
        "checkpoint_epoch": ckpt.epoch,
        "tau": tau,
        "light_fraction": report.light_fraction,
        "mse": {k: {"full": v.mse_full, "light": v.mse_light, "mixed": v.mse_mixed}
                for k, v in parity.items()},
        "probe": {"full": probe.acc_full, "light": probe.acc_light, "mixed": probe.acc_mixed},
    })
    return EXIT_OK


def _sweep_worker(payload):
    base_cfg, beta = payload
    cfg = replace(base_cfg, dsl=replace(base_cfg.dsl, beta=beta))
    result = training.train(cfg)
    return ev.SparsityCurvePoint(
        beta=beta,
        sparsity=routing.activation_sparsity(result.model.mask),
        l_recon=result.metrics[-1]["l_recon"] if result.metrics else float("nan"),
    )


def cmd_sweep_beta(args) -> int:
    run = _load(args.config, args.seed)
    out = run.output_dir
    os.makedirs(out, exist_ok=True)
    betas = sorted(set(args.betas))
    if any(b < 0 for b in betas):
        raise ConfigError(f"betas must be >= 0, got {args.betas}")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            points = list(pool.map(_sweep_worker, [(run.train_cfg, b) for b in betas]))
    else:
        points = ev.sparsity_sweep(run.train_cfg, betas)
    ev.write_sparsity_csv(points, os.path.join(out, "sparsity.csv"))
    return EXIT_OK


def _ablation_worker(payload):
    base_cfg, placement = payload
    rows = ev.placement_ablation(base_cfg, [placement])
    return rows[0]


def cmd_ablate_placement(args) -> int:
    run = _load(args.config, args.seed)
    out = run.output_dir
    os.makedirs(out, exist_ok=True)
    n_layers = len(run.train_cfg.dims) - 1
    for i in args.placements:
        if not 1 <= i <= n_layers - 1:
            raise ConfigError(
                f"placement {i} is out of range [1, {n_layers - 1}] for this architecture"
            )
    placements = sorted(set(args.placements))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_ablation_worker, [(run.train_cfg, i) for i in placements]))
    else:
        rows = ev.placement_ablation(run.train_cfg, placements)
    ev.write_ablation_csv(rows, os.path.join(out, "ablation.csv"))
    return EXIT_OK


def cmd_gen_data(args) -> int:
    run = _load(args.config, args.seed)
    data_cfg = run.train_cfg.data
    for tag, frames in (
        (dat.EASY, dat.gen_easy(data_cfg.spec, data_cfg.n_easy)),
        (dat.HARD, dat.gen_hard(data_cfg.spec, data_cfg.n_hard)),
    ):
        subdir = os.path.join(args.out, tag)
        os.makedirs(subdir, exist_ok=True)
        if frames:
            samples = np.concatenate([f.samples for f in frames])
            dat.write_wav(os.path.join(subdir, "frames.wav"), samples)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchpass")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's train and data seeds")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel runs for sweeps and ablations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint: routing, parity, probe")
    p.add_argument("config")
    p.add_argument("checkpoint")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--tau", type=float, default=None)
    group.add_argument("--target-light-fraction", type=float, default=None,
                       dest="target_light_fraction")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-beta", help="train once per compression weight")
    p.add_argument("config")
    p.add_argument("--betas", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_sweep_beta)

    p = sub.add_parser("ablate-placement", help="train once per block position")
    p.add_argument("config")
    p.add_argument("--placements", type=int, nargs="+", required=True)
    p.set_defaults(func=cmd_ablate_placement)

    p = sub.add_parser("gen-data", help="write the synthetic corpus as WAV files")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())
