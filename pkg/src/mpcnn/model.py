"""The MultipathCNN detector: a VGG-style trunk sized by the grid side.

Four blocks of two same-padded 3x3 convolutions with ReLU, channel
widths (16, 32, 64, 128), a ceil-mode 2x2 maxpool closing each block
(skipped once a spatial dim would drop below 2), then a flatten and a
256-wide ReLU classifier head with a sigmoid probability output.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset, derived_rng
from .nn.layers import Conv2d, Dense, Flatten, MaxPool2d, Network, ReLU, Sigmoid
from .nn.ops import he_uniform_init, logloss, sigmoid
from .nn.optim import AdamState, adam_step

DEFAULT_CHANNELS = (16, 32, 64, 128)


@dataclass(frozen=True)
class ModelSpec:
    """Layer plan of a MultipathCNN instance."""

    n: int
    channels: tuple = DEFAULT_CHANNELS
    convs_per_block: int = 2
    classifier_width: int = 256

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"grid side must be >= 4, got {self.n}")

    @property
    def pool_plan(self) -> tuple:
        """Which blocks end in a pool: only while both dims are >= 2."""
        plan, side = [], self.n
        for _ in self.channels:
            if side >= 2:
                plan.append(True)
                side = (side + 1) // 2
            else:
                plan.append(False)
        return tuple(plan)

    @property
    def final_side(self) -> int:
        side = self.n
        for pooled in self.pool_plan:
            if pooled:
                side = (side + 1) // 2
        return side

    @property
    def flatten_width(self) -> int:
        return self.channels[-1] * self.final_side**2

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "channels": list(self.channels),
            "convs_per_block": self.convs_per_block,
            "classifier_width": self.classifier_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            n=int(d["n"]),
            channels=tuple(d["channels"]),
            convs_per_block=int(d["convs_per_block"]),
            classifier_width=int(d["classifier_width"]),
        )


class MultipathCNN:
    """Binary multipath detector over 2xNxN correlator snapshots."""

    def __init__(self, spec: ModelSpec, network: Network, cam_layer: int):
        self.spec = spec
        self.network = network
        self._cam_layer = cam_layer  # index of the last conv block's final ReLU

    @property
    def dtype(self):
        return self.network.params()[0].dtype

    def params(self):
        return self.network.params()

    def astype(self, dtype):
        self.network.astype(dtype)
        return self

    def probability_network(self) -> Network:
        """Score network with the sigmoid output appended (shared params)."""
        return Network(self.network.layers + [Sigmoid()])

    def scores(self, x) -> np.ndarray:
        """Pre-sigmoid scores for a normalized batch (B,2,N,N) -> (B,)."""
        return self.network.forward(x)[:, 0]

    def predict_proba(self, x) -> np.ndarray:
        """Probabilities in float64 for a normalized batch."""
        return sigmoid(self.scores(x).astype(np.float64))


def build_model(
    n: int,
    seed: int,
    channels: tuple = DEFAULT_CHANNELS,
    classifier_width: int = 256,
    dtype=np.float32,
) -> MultipathCNN:
    """Construct and He-initialize a MultipathCNN for grid side n."""
    spec = ModelSpec(n=n, channels=tuple(channels), classifier_width=classifier_width)
    rng = derived_rng(seed, 0)
    layers = []
    in_ch = 2
    for pooled, ch in zip(spec.pool_plan, spec.channels):
        for _ in range(spec.convs_per_block):
            w = he_uniform_init((ch, in_ch, 3, 3), rng, dtype=dtype)
            layers.append(Conv2d(w, np.zeros(ch, dtype=dtype)))
            layers.append(ReLU())
            in_ch = ch
        cam_layer = len(layers) - 1
        if pooled:
            layers.append(MaxPool2d())
    layers.append(Flatten())
    layers.append(
        Dense(
            he_uniform_init((classifier_width, spec.flatten_width), rng, dtype=dtype),
            np.zeros(classifier_width, dtype=dtype),
        )
    )
    layers.append(ReLU())
    layers.append(
        Dense(
            he_uniform_init((1, classifier_width), rng, dtype=dtype),
            np.zeros(1, dtype=dtype),
        )
    )
    return MultipathCNN(spec, Network(layers), cam_layer)


def normalize_tensors(tensors: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Per-sample division by the max absolute value (zero-safe)."""
    x = np.asarray(tensors, dtype=dtype)
    if x.ndim == 3:
        x = x[None]
    peak = np.max(np.abs(x.reshape(x.shape[0], -1)), axis=1)
    peak[peak == 0] = 1.0
    return x / peak[:, None, None, None]


@dataclass
class TrainHyper:
    epochs: int = 30
    batch_size: int = 32
    lr_start: float = 1e-3
    lr_end: float = 1e-4
    seed: int = 0


@dataclass
class TrainReport:
    """Per-epoch training curve plus timing and provenance."""

    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    wall_seconds: float = 0.0
    optimizer_steps: int = 0
    checkpoint_path: str = ""

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write("epoch,train_loss,train_acc,val_acc\n")
            for e, (l, a, v) in enumerate(
                zip(self.train_loss, self.train_acc, self.val_acc), start=1
            ):
                f.write(f"{e},{l:.6f},{a:.6f},{v:.6f}\n")


def train(
    model: MultipathCNN,
    train_ds: Dataset,
    val_ds: Dataset | None = None,
    hyper: TrainHyper | None = None,
) -> TrainReport:
    """Mini-batch Adam training; the final-epoch model is kept as-is."""
    hyper = hyper or TrainHyper()
    n_samples = len(train_ds)
    if n_samples == 0:
        raise ValueError("empty training dataset")
    x_all = normalize_tensors(train_ds.tensors, dtype=model.dtype)
    y_all = train_ds.labels.astype(np.float64)
    batches_per_epoch = math.ceil(n_samples / hyper.batch_size)
    params = model.params()
    state = AdamState(
        [p.shape for p in params],
        lr_start=hyper.lr_start,
        lr_end=hyper.lr_end,
        total_steps=hyper.epochs * batches_per_epoch,
        dtype=model.dtype,
    )
    report = TrainReport()
    t0 = time.perf_counter()
    for epoch in range(hyper.epochs):
        perm = derived_rng(hyper.seed, 1, epoch).permutation(n_samples)
        loss_sum = 0.0
        hits = 0
        for b in range(batches_per_epoch):
            idx = perm[b * hyper.batch_size : (b + 1) * hyper.batch_size]
            y = y_all[idx]
            z = model.network.forward(x_all[idx])  # (B, 1)
            p = sigmoid(z[:, 0].astype(np.float64))
            losses, _ = logloss(p, y)
            loss_sum += float(losses.sum())
            hits += int(((p >= 0.5) == (y == 1.0)).sum())
            # d(mean loss)/dz = (p - y)/B; fused sigmoid+logloss gradient
            gz = ((p - y) / len(idx)).astype(model.dtype)[:, None]
            model.network.backward(gz)
            adam_step(params, model.network.grads(), state)
        report.train_loss.append(loss_sum / n_samples)
        report.train_acc.append(hits / n_samples)
        report.val_acc.append(evaluate(model, val_ds) if val_ds is not None else math.nan)
    report.optimizer_steps = state.step
    report.wall_seconds = time.perf_counter() - t0
    return report


def evaluate(model: MultipathCNN, ds: Dataset, batch_size: int = 512) -> float:
    """Fraction of samples where (p >= 0.5) matches the label."""
    if len(ds) == 0:
        raise ValueError("empty dataset")
    x = normalize_tensors(ds.tensors, dtype=model.dtype)
    hits = 0
    for i in range(0, len(ds), batch_size):
        p = model.predict_proba(x[i : i + batch_size])
        hits += int(((p >= 0.5) == (ds.labels[i : i + batch_size] == 1)).sum())
    return hits / len(ds)


def grad_cam(model: MultipathCNN, tensor: np.ndarray) -> np.ndarray:
    """Class-activation heatmap (NxN in [0, 1]) for one snapshot tensor.

    Channel weights are the spatial means of the pre-sigmoid score
    gradient at the last conv block's activations; the weighted sum is
    rectified, nearest-neighbor upsampled, and max-normalized.
    """
    x = normalize_tensors(tensor[None] if tensor.ndim == 3 else tensor, model.dtype)
    layers = model.network.layers
    act = x
    for layer in layers[: model._cam_layer + 1]:
        act = layer.forward(act)
    out = act
    for layer in layers[model._cam_layer + 1 :]:
        out = layer.forward(out)
    grad = np.ones_like(out)
    for layer in reversed(layers[model._cam_layer + 1 :]):
        grad = layer.backward(grad)
    weights = grad.mean(axis=(2, 3))  # (1, C)
    cam = np.maximum((weights[:, :, None, None] * act).sum(axis=1)[0], 0.0)
    n = model.spec.n
    idx = (np.arange(n) * cam.shape[0]) // n
    up = cam[np.ix_(idx, idx)].astype(np.float64)
    peak = up.max()
    if peak > 0:
        up /= peak
    return up
