"""Experiment campaigns: discretization sweeps and model benchmarks.

Every (cell, run) job derives its own seeds from the campaign seed, so
results are identical no matter how jobs are scheduled; aggregation is
keyed and emitted in sorted order.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .datagen import (
    Dataset,
    ScenarioSpace,
    build_dataset,
    build_tap_series_set,
    draw_scenarios,
)
from .model import MultipathCNN, TrainHyper, build_model, evaluate, grad_cam, train
from .svm import SvmDetector

CNN_NAME = "MultipathCNN"
SVM_NAME = "SVM"

RESULTS_HEADER = (
    "experiment,ti_ms,cn0_dbhz,dtheta_deg,n_discr,model,"
    "acc_mean_pct,acc_std_pct,n_runs"
)


@dataclass(frozen=True, order=True)
class ResultKey:
    experiment: str
    ti_ms: float
    cn0_dbhz: float
    dtheta_deg: float
    n_discr: int
    model: str


class ResultTable:
    """Per-run accuracies keyed by experiment cell."""

    def __init__(self):
        self.rows: dict[ResultKey, list[float]] = {}

    def add(self, key: ResultKey, accuracy: float) -> None:
        self.rows.setdefault(key, []).append(accuracy)

    def accuracies(self, key: ResultKey) -> list[float]:
        return self.rows[key]

    def mean_pct(self, key: ResultKey) -> float:
        return float(np.mean(self.rows[key])) * 100.0

    def std_pct(self, key: ResultKey) -> float:
        return float(np.std(self.rows[key])) * 100.0

    def to_csv_text(self) -> str:
        lines = [RESULTS_HEADER]
        for key in sorted(self.rows):
            lines.append(
                f"{key.experiment},{key.ti_ms:g},{key.cn0_dbhz:g},"
                f"{key.dtheta_deg:g},{key.n_discr},{key.model},"
                f"{self.mean_pct(key):.2f},{self.std_pct(key):.2f},"
                f"{len(self.rows[key])}"
            )
        return "\n".join(lines) + "\n"


def derive_seed(root: int, *key: int) -> int:
    """Stable 64-bit seed for a (campaign seed, job coordinates) tuple."""
    ss = np.random.SeedSequence(root, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def _space(args: dict, n: int) -> ScenarioSpace:
    return ScenarioSpace(
        ti=args["ti"],
        cn0_dbhz=args["cn0"],
        n=n,
        dtheta_deg=args["dtheta"],
        alpha_range=args["alpha_range"],
        dtau_range=args["dtau_range"],
        df_range=args["df_range"],
        w_epochs=args["w_epochs"],
    )


def _train_cnn_once(space, args, seed_tag, scenarios_pair=None):
    ds_seed = derive_seed(args["seed"], seed_tag, 0)
    te_seed = derive_seed(args["seed"], seed_tag, 1)
    train_sc, test_sc = scenarios_pair or (None, None)
    train_ds = build_dataset(
        space, args["train_per_class"], ds_seed, keep_scenarios=False,
        scenarios=train_sc,
    )
    test_ds = build_dataset(
        space, args["test_per_class"], te_seed, keep_scenarios=False,
        scenarios=test_sc,
    )
    model = build_model(space.n, seed=derive_seed(args["seed"], seed_tag, 2))
    hyper = TrainHyper(
        epochs=args["epochs"],
        batch_size=args["batch_size"],
        seed=derive_seed(args["seed"], seed_tag, 3),
    )
    train(model, train_ds, hyper=hyper)
    return evaluate(model, test_ds)


def _type1_job(args: dict):
    key = ResultKey(
        "type1", args["ti_ms"], args["cn0"], args["dtheta"], args["n"], CNN_NAME
    )
    space = _space(args, args["n"])
    acc = _train_cnn_once(space, args, args["tag"])
    return key, acc


def _type2_job(args: dict):
    """Paired benchmark: both models see the same scenario draws."""
    space = _space(args, args["n"])
    ds_seed = derive_seed(args["seed"], args["tag"], 0)
    te_seed = derive_seed(args["seed"], args["tag"], 1)
    train_sc = draw_scenarios(space, args["train_per_class"], ds_seed)
    test_sc = draw_scenarios(space, args["test_per_class"], te_seed)
    acc_cnn = _train_cnn_once(space, args, args["tag"], (train_sc, test_sc))
    train_taps = build_tap_series_set(
        space, args["train_per_class"], ds_seed, scenarios=train_sc
    )
    test_taps = build_tap_series_set(
        space, args["test_per_class"], te_seed, scenarios=test_sc
    )
    detector = SvmDetector().fit(
        train_taps, seed=derive_seed(args["seed"], args["tag"], 4)
    )
    acc_svm = detector.accuracy(test_taps)
    base = dict(
        experiment="type2",
        ti_ms=args["ti_ms"],
        cn0_dbhz=args["cn0"],
        dtheta_deg=args["dtheta"],
        n_discr=args["n"],
    )
    return [
        (ResultKey(model=CNN_NAME, **base), acc_cnn),
        (ResultKey(model=SVM_NAME, **base), acc_svm),
    ]


def _limit_worker_threads():
    try:
        import threadpoolctl

        global _tp_limit
        _tp_limit = threadpoolctl.threadpool_limits(limits=1)
    except ImportError:
        pass


def _map_jobs(fn, job_args, jobs: int):
    if jobs <= 1:
        return [fn(a) for a in job_args]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_limit_worker_threads
    ) as pool:
        return list(pool.map(fn, job_args))


def _base_args(cfg: ExperimentConfig) -> dict:
    return dict(
        ti=cfg.ti,
        ti_ms=cfg.ti_ms,
        alpha_range=cfg.alpha_range,
        dtau_range=cfg.dtau_range_chips,
        df_range=cfg.df_range_hz,
        w_epochs=cfg.w_epochs,
        train_per_class=cfg.train_per_class,
        test_per_class=cfg.test_per_class,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )


def run_type1(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Discretization sweep: one CNN per (N, C/N0, dtheta, run)."""
    job_args = []
    tag = 0
    for n in cfg.n_list:
        for cn0 in cfg.cn0_list:
            for dtheta in cfg.dtheta_list_deg:
                for run in range(cfg.runs):
                    tag += 1
                    args = _base_args(cfg)
                    args.update(n=n, cn0=cn0, dtheta=dtheta, tag=tag)
                    job_args.append(args)
    table = ResultTable()
    for key, acc in _map_jobs(_type1_job, job_args, jobs):
        table.add(key, acc)
    return table


def run_type2(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Benchmark at fixed N: paired CNN and SVM per (C/N0, dtheta, run)."""
    job_args = []
    tag = 0
    for cn0 in cfg.cn0_list:
        for dtheta in cfg.dtheta_list_deg:
            for run in range(cfg.runs):
                tag += 1
                args = _base_args(cfg)
                args.update(n=cfg.n_type2, cn0=cn0, dtheta=dtheta, tag=tag)
                job_args.append(args)
    table = ResultTable()
    for rows in _map_jobs(_type2_job, job_args, jobs):
        for key, acc in rows:
            table.add(key, acc)
    return table


def emit_results(table: ResultTable, out_dir) -> list:
    """results.csv (source of truth) plus best-effort grouped-bar PNGs."""
    if not table.rows:
        raise ValueError("empty result table")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="") as f:
        f.write(table.to_csv_text())
    written = [csv_path]
    for experiment in sorted({k.experiment for k in table.rows}):
        png = _plot_experiment(table, experiment, out_dir)
        if png:
            written.append(png)
    return written


def _plot_experiment(table: ResultTable, experiment: str, out_dir):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        keys = sorted(k for k in table.rows if k.experiment == experiment)
        models = sorted({k.model for k in keys})
        cells = sorted({(k.ti_ms, k.cn0_dbhz, k.dtheta_deg, k.n_discr) for k in keys})
        x = np.arange(len(cells))
        width = 0.8 / len(models)
        fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(cells)), 4))
        for mi, model in enumerate(models):
            means, stds = [], []
            for cell in cells:
                key = ResultKey(experiment, *cell, model)
                means.append(table.mean_pct(key) if key in table.rows else 0.0)
                stds.append(table.std_pct(key) if key in table.rows else 0.0)
            ax.bar(x + mi * width, means, width, yerr=stds, label=model, capsize=2)
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(
            [f"Ti{c[0]:g}ms\nC/N0 {c[1]:g}\nd0 {c[2]:g}\nN{c[3]}" for c in cells],
            fontsize=7,
        )
        ax.set_ylabel("accuracy, %")
        ax.set_ylim(0, 105)
        ax.legend()
        ax.set_title(f"{experiment} accuracy (mean over runs)")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{experiment}_accuracy.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path
    except Exception:  # plotting never blocks the CSV emission
        return None


def emit_heatmaps(model: MultipathCNN, dataset: Dataset, k: int, out_dir) -> list:
    """k samples per class: heatmap + input I-channel, CSV and PNG each."""
    written = []
    for label in (0, 1):
        picked = np.flatnonzero(dataset.labels == label)[:k]
        for rank, i in enumerate(picked):
            sample_dir = os.path.join(out_dir, f"label{label}_sample{rank}")
            os.makedirs(sample_dir, exist_ok=True)
            heat = grad_cam(model, dataset.tensors[i])
            ichan = dataset.tensors[i][0]
            for name, grid in (("heatmap", heat), ("input_i", ichan)):
                cpath = os.path.join(sample_dir, f"{name}.csv")
                with open(cpath, "w", newline="") as f:
                    writer = csv.writer(f)
                    writer.writerows([[f"{v:.6f}" for v in row] for row in grid])
                written.append(cpath)
                png = _save_gray_png(grid, os.path.join(sample_dir, f"{name}.png"))
                if png:
                    written.append(png)
    return written


def _save_gray_png(grid, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(3, 3))
        ax.imshow(np.asarray(grid, dtype=float), cmap="gray")
        ax.axis("off")
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        return path
    except Exception:
        return None
