"""RBF-kernel SVM benchmark detector trained by sequential minimal optimization.

Features are extracted from 13-tap correlation series: the rate of
strict interior local maxima per correlation interval, and the variance
of the argmax code delay across epochs.  Hyperparameters come from a
3-fold stratified cross-validation over a fixed grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .datagen import TAP_CODE_AXIS, TapSeries

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA_GRID = (0.01, 0.1, 1.0, 10.0)
KKT_TOL = 1e-3


class SmoConvergenceError(Exception):
    pass


def feature_f2(series: TapSeries) -> float:
    """Strict interior local maxima per epoch, divided by the epoch length."""
    taps = series.taps
    if taps.shape[1] < 3:
        raise ValueError("need at least 3 taps per epoch")
    inner = taps[:, 1:-1]
    peaks = (inner > taps[:, :-2]) & (inner > taps[:, 2:])
    return float(peaks.sum(axis=1).mean() / series.ti)


def feature_f3(series: TapSeries) -> float:
    """Population variance (chips^2) of the per-epoch argmax code delay."""
    if series.taps.shape[0] < 2:
        raise ValueError("need at least 2 epochs")
    argmax_chips = TAP_CODE_AXIS[np.argmax(series.taps, axis=1)]
    return float(np.var(argmax_chips))


def extract_features(series_list) -> np.ndarray:
    return np.array([[feature_f2(s), feature_f3(s)] for s in series_list])


@dataclass
class Scaler:
    """Per-feature standardization; constant features scale to zero."""

    mean: np.ndarray = None
    std: np.ndarray = None

    def fit(self, x: np.ndarray) -> "Scaler":
        if x.shape[0] < 2:
            raise ValueError("need at least 2 samples to fit a scaler")
        self.mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std == 0] = 1.0
        self.std = std
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.asarray(d["mean"]), std=np.asarray(d["std"]))


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for row sets a (m,d) and b (n,d)."""
    d2 = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(d2, 0.0))


@dataclass
class SvmModel:
    """Trained classifier state, persistable as JSON."""

    support_vectors: np.ndarray  # (m, d), scaled feature space
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    gamma: float
    c_box: float
    scaler: Scaler
    diagnostics: dict = field(default_factory=dict)


def decision_function(model: SvmModel, x_scaled: np.ndarray) -> np.ndarray:
    k = rbf_kernel(x_scaled, model.support_vectors, model.gamma)
    return k @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, x_scaled: np.ndarray):
    """(labels in {-1,+1}, decision values); an exact zero maps to +1."""
    dec = decision_function(model, np.atleast_2d(x_scaled))
    labels = np.where(dec >= 0.0, 1, -1)
    return labels, dec


def kkt_max_violation(margins, alphas, c_box, tol=0.0):
    """Largest violation of the soft-margin optimality conditions.

    Bound points (alpha 0 or C) must satisfy one-sided margin bounds;
    free points must sit on the margin within tol.
    """
    at_zero = alphas <= 1e-8
    at_c = alphas >= c_box - 1e-8
    free = ~(at_zero | at_c)
    viol = np.zeros_like(margins)
    viol[at_zero] = (1.0 - tol) - margins[at_zero]
    viol[at_c] = margins[at_c] - (1.0 + tol)
    viol[free] = np.abs(margins[free] - 1.0) - tol
    return float(np.maximum(viol, 0.0).max()) if len(margins) else 0.0


def dual_objective(k, y, alphas) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ k @ ay)


def smo_train(
    x: np.ndarray,
    y: np.ndarray,
    c_box: float,
    gamma: float,
    tol: float = KKT_TOL,
    seed: int = 0,
    max_sweeps: int = 2000,
    scaler: Scaler | None = None,
) -> SvmModel:
    """Solve the soft-margin dual on pre-scaled features by SMO.

    Runs Platt-style pair updates until no point violates the KKT
    conditions by more than tol; raises SmoConvergenceError if the sweep
    budget runs out first.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("labels must be -1/+1")
    n = len(y)
    k = rbf_kernel(x, x, gamma)
    alphas = np.zeros(n)
    b = 0.0
    errors = -y.copy()  # f(x) - y with f = 0 initially
    rng = np.random.default_rng(seed)

    def take_step(i, j):
        nonlocal b
        if i == j:
            return False
        ai_old, aj_old = alphas[i], alphas[j]
        yi, yj = y[i], y[j]
        if yi != yj:
            lo, hi = max(0.0, aj_old - ai_old), min(c_box, c_box + aj_old - ai_old)
        else:
            lo, hi = max(0.0, ai_old + aj_old - c_box), min(c_box, ai_old + aj_old)
        if lo >= hi:
            return False
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        ei, ej = errors[i], errors[j]
        if eta > 1e-12:
            aj = aj_old + yj * (ei - ej) / eta
            aj = min(hi, max(lo, aj))
        else:
            # flat direction: dual gain is linear in alpha_j with slope
            # proportional to y_j*(E_i - E_j); move to the winning endpoint
            aj = hi if (yj * (ei - ej)) > 0 else lo
        if abs(aj - aj_old) < 1e-12 * (aj + aj_old + 1e-12):
            return False
        ai = ai_old + yi * yj * (aj_old - aj)
        # snap numerically-bound multipliers
        if ai < 1e-10:
            ai = 0.0
        elif ai > c_box - 1e-10:
            ai = c_box
        if aj < 1e-10:
            aj = 0.0
        elif aj > c_box - 1e-10:
            aj = c_box
        d_i, d_j = ai - ai_old, aj - aj_old
        b1 = b - ei - yi * d_i * k[i, i] - yj * d_j * k[i, j]
        b2 = b - ej - yi * d_i * k[i, j] - yj * d_j * k[j, j]
        if 0.0 < ai < c_box:
            new_b = b1
        elif 0.0 < aj < c_box:
            new_b = b2
        else:
            new_b = 0.5 * (b1 + b2)
        errors[:] += yi * d_i * k[:, i] + yj * d_j * k[:, j] + (new_b - b)
        b = new_b
        alphas[i], alphas[j] = ai, aj
        return True

    def violators():
        margins = y * (errors + y)  # y * f(x)
        at_zero = alphas <= 1e-8
        at_c = alphas >= c_box - 1e-8
        free = ~(at_zero | at_c)
        viol = np.zeros(n)
        viol[at_zero] = 1.0 - margins[at_zero]
        viol[at_c] = margins[at_c] - 1.0
        viol[free] = np.abs(margins[free] - 1.0)
        return viol

    sweeps = 0
    while True:
        viol = violators()
        worst = float(viol.max()) if n else 0.0
        if worst <= tol:
            break
        sweeps += 1
        if sweeps > max_sweeps:
            raise SmoConvergenceError(
                f"no convergence after {max_sweeps} sweeps; "
                f"max KKT violation {worst:.3e} (C={c_box}, gamma={gamma})"
            )
        progressed = False
        order = np.argsort(-viol)
        for i in order:
            if viol[i] <= tol:
                break
            # second-choice heuristic: largest |E_i - E_j|, then random
            j = int(np.argmax(np.abs(errors - errors[i])))
            if take_step(i, j):
                progressed = True
                continue
            for j in rng.permutation(n):
                if take_step(i, int(j)):
                    progressed = True
                    break
        if not progressed:
            raise SmoConvergenceError(
                f"stalled after {sweeps} sweeps; max KKT violation {worst:.3e} "
                f"(C={c_box}, gamma={gamma})"
            )

    margins = y * (errors + y)
    diagnostics = {
        "sweeps": sweeps,
        "kkt_max_violation": kkt_max_violation(margins, alphas, c_box),
        "alpha_dot_y": float(alphas @ y),
        "dual_objective": dual_objective(k, y, alphas),
        "n_support": int((alphas > 1e-8).sum()),
        "alphas": alphas,
        "labels": y,
    }
    sv = alphas > 1e-8
    return SvmModel(
        support_vectors=x[sv].copy(),
        dual_coef=(alphas * y)[sv],
        bias=b,
        gamma=gamma,
        c_box=c_box,
        scaler=scaler,
        diagnostics=diagnostics,
    )


def stratified_folds(y, folds, seed):
    """Per-class shuffled assignment; fold sizes differ by <= 1 per class."""
    assignment = np.empty(len(y), dtype=int)
    rng = np.random.default_rng(seed)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < folds:
            raise ValueError(f"class {cls} has fewer samples than folds")
        idx = rng.permutation(idx)
        for f in range(folds):
            assignment[idx[f::folds]] = f
    return assignment


def cross_validate(
    x,
    y,
    folds: int = 3,
    c_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    tol: float = KKT_TOL,
    seed: int = 0,
):
    """Grid search by stratified k-fold accuracy.

    The scaler is fit on each training fold only.  Ties prefer the
    smaller C, then the smaller gamma.  Returns (best_c, best_gamma,
    {(c, gamma): [fold accuracies]}).
    """
    if not len(c_grid) or not len(gamma_grid):
        raise ValueError("empty hyperparameter grid")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    assignment = stratified_folds(y, folds, seed)
    results = {}
    for c_box in sorted(c_grid):
        for gamma in sorted(gamma_grid):
            accs = []
            for f in range(folds):
                tr, va = assignment != f, assignment == f
                scaler = Scaler().fit(x[tr])
                model = smo_train(
                    scaler.transform(x[tr]), y[tr], c_box, gamma, tol=tol, seed=seed
                )
                labels, _ = svm_predict(model, scaler.transform(x[va]))
                accs.append(float(np.mean(labels == y[va])))
            results[(c_box, gamma)] = accs
    best = max(
        results,
        key=lambda cg: (np.mean(results[cg]), -cg[0], -cg[1]),
    )
    return best[0], best[1], results


class SvmDetector:
    """End-to-end pipeline: features -> CV -> scaling -> SMO."""

    def __init__(self, folds=3, c_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID):
        self.folds = folds
        self.c_grid = c_grid
        self.gamma_grid = gamma_grid
        self.model: SvmModel | None = None
        self.cv_results = None

    def fit(self, series_list, seed: int = 0) -> "SvmDetector":
        x = extract_features(series_list)
        y = np.array([1.0 if s.label == 1 else -1.0 for s in series_list])
        c_box, gamma, self.cv_results = cross_validate(
            x, y, self.folds, self.c_grid, self.gamma_grid, seed=seed
        )
        scaler = Scaler().fit(x)
        self.model = smo_train(
            scaler.transform(x), y, c_box, gamma, seed=seed, scaler=scaler
        )
        return self

    def predict(self, series_list) -> np.ndarray:
        """Labels in {0, 1} matching the dataset convention."""
        x = self.model.scaler.transform(extract_features(series_list))
        labels, _ = svm_predict(self.model, x)
        return (labels == 1).astype(int)

    def accuracy(self, series_list) -> float:
        truth = np.array([s.label for s in series_list])
        return float(np.mean(self.predict(series_list) == truth))


def save_svm(model: SvmModel, path) -> None:
    doc = {
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "bias": model.bias,
        "gamma": model.gamma,
        "c_box": model.c_box,
        "scaler": model.scaler.to_dict() if model.scaler else None,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)


def load_svm(path) -> SvmModel:
    with open(path) as f:
        doc = json.load(f)
    return SvmModel(
        support_vectors=np.asarray(doc["support_vectors"]),
        dual_coef=np.asarray(doc["dual_coef"]),
        bias=float(doc["bias"]),
        gamma=float(doc["gamma"]),
        c_box=float(doc["c_box"]),
        scaler=Scaler.from_dict(doc["scaler"]) if doc["scaler"] else None,
    )
