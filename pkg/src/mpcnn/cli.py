"""Command-line front door.

Subcommands: generate, train-cnn, train-svm, eval, experiment
{type1,type2}, heatmap.  Global flags: --config, --seed, --out, --runs,
--full-scale.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ExperimentConfig, desk_type1_config, desk_type2_config
from .datagen import ScenarioSpace, build_dataset, build_tap_series_set, read_dataset, write_dataset
from .harness import emit_heatmaps, emit_results, run_type1, run_type2
from .model import TrainHyper, build_model, evaluate, train
from .svm import SvmDetector, save_svm


def _parser():
    p = argparse.ArgumentParser(
        prog="mpcnn",
        description="Synthetic GNSS correlator snapshots and multipath detectors",
    )
    p.add_argument("--config", help="JSON experiment config file")
    p.add_argument("--seed", type=int, default=None, help="campaign seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--runs", type=int, default=None, help="runs per cell")
    p.add_argument("--full-scale", action="store_true", help="20 runs, 2000/500 samples")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build and store a snapshot dataset")
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--ti-ms", type=float, default=1.0)
    g.add_argument("--cn0", type=float, default=50.0)
    g.add_argument("--dtheta", type=float, default=0.0)
    g.add_argument("--per-class", type=int, default=800)
    g.add_argument("--noiseless", action="store_true")
    g.add_argument("--name", default="dataset.gmpd")

    tc = sub.add_parser("train-cnn", help="train a detector on a stored dataset")
    tc.add_argument("--train", required=True, help="training dataset file")
    tc.add_argument("--val", help="held-out dataset file")

    ts = sub.add_parser("train-svm", help="train the SVM benchmark from a config cell")
    ts.add_argument("--ti-ms", type=float, default=1.0)
    ts.add_argument("--cn0", type=float, default=50.0)
    ts.add_argument("--dtheta", type=float, default=0.0)
    ts.add_argument("--per-class", type=int, default=800)

    ev = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)

    ex = sub.add_parser("experiment", help="run a campaign and emit results")
    ex.add_argument("kind", choices=["type1", "type2"])
    ex.add_argument("--ti-ms", type=float, default=None)

    hm = sub.add_parser("heatmap", help="class-activation maps for stored samples")
    hm.add_argument("--checkpoint", required=True)
    hm.add_argument("--data", required=True)
    hm.add_argument("--k", type=int, default=1)
    return p


def _campaign_config(args, kind: str) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    elif kind == "type1":
        cfg = desk_type1_config()
    else:
        cfg = desk_type2_config()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.runs is not None:
        updates["runs"] = args.runs
    if getattr(args, "ti_ms", None) is not None:
        updates["ti_ms"] = args.ti_ms
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    if args.full_scale:
        cfg = cfg.full_scale()
    return cfg


def _cmd_generate(args):
    seed = args.seed if args.seed is not None else 0
    space = ScenarioSpace(
        ti=args.ti_ms * 1e-3, cn0_dbhz=args.cn0, n=args.n, dtheta_deg=args.dtheta
    )
    ds = build_dataset(
        space, args.per_class, seed, noisy=not args.noiseless, keep_scenarios=False
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, args.name)
    write_dataset(ds, path)
    print(f"wrote {len(ds)} snapshots to {path}")
    return 0


def _cmd_train_cnn(args):
    from .checkpoint import save_checkpoint

    train_ds = read_dataset(args.train)
    val_ds = read_dataset(args.val) if args.val else None
    seed = args.seed if args.seed is not None else 0
    model = build_model(train_ds.n, seed=seed)
    hyper = TrainHyper(seed=seed)
    report = train(model, train_ds, val_ds=val_ds, hyper=hyper)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "multipath_cnn.gmpw")
    save_checkpoint(model, ckpt, hyper=dataclasses.asdict(hyper))
    report.checkpoint_path = ckpt
    report.to_csv(os.path.join(args.out, "train_report.csv"))
    last_val = report.val_acc[-1] if val_ds else float("nan")
    print(
        f"trained {report.n_epochs} epochs in {report.wall_seconds:.1f}s; "
        f"final train acc {report.train_acc[-1]:.4f}, val acc {last_val:.4f}"
    )
    print(f"checkpoint: {ckpt}")
    return 0


def _cmd_train_svm(args):
    seed = args.seed if args.seed is not None else 0
    space = ScenarioSpace(
        ti=args.ti_ms * 1e-3, cn0_dbhz=args.cn0, n=10, dtheta_deg=args.dtheta
    )
    series = build_tap_series_set(space, args.per_class, seed)
    detector = SvmDetector().fit(series, seed=seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "svm_model.json")
    save_svm(detector.model, path)
    print(
        f"selected C={detector.model.c_box:g} gamma={detector.model.gamma:g}; "
        f"train accuracy {detector.accuracy(series):.4f}"
    )
    print(f"model: {path}")
    return 0


def _cmd_eval(args):
    from .checkpoint import load_checkpoint

    model = load_checkpoint(args.checkpoint)
    ds = read_dataset(args.data)
    acc = evaluate(model, ds)
    print(f"accuracy {acc:.4f} on {len(ds)} samples")
    return 0


def _cmd_experiment(args):
    cfg = _campaign_config(args, args.kind)
    runner = run_type1 if args.kind == "type1" else run_type2
    table = runner(cfg, jobs=args.jobs)
    written = emit_results(table, args.out)
    cfg.to_json(os.path.join(args.out, "config.json"))
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_heatmap(args):
    from .checkpoint import load_checkpoint

    model = load_checkpoint(args.checkpoint)
    ds = read_dataset(args.data)
    written = emit_heatmaps(model, ds, args.k, args.out)
    print(f"wrote {len(written)} heatmap files under {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train-cnn": _cmd_train_cnn,
    "train-svm": _cmd_train_svm,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
    "heatmap": _cmd_heatmap,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
