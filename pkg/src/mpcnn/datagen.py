"""Labeled correlator-output datasets: snapshots, tap series, file I/O.

Category A samples contain only the direct signal; Category B samples
add one attenuated, shifted multipath replica.  Every sample is rendered
from its own derived random stream, so dataset construction is
deterministic for a given seed no matter how the work is scheduled.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .correlator import EpochParams, clean_iq_field, noise_sigma

TAP_COUNT = 13
TAP_CODE_AXIS = np.linspace(-1.0, 1.0, TAP_COUNT)

MAGIC = b"GMPD"
FORMAT_VERSION = 1


class DatasetFormatError(Exception):
    """Base error for dataset file problems."""


class BadMagicError(DatasetFormatError):
    pass


class TruncatedPayloadError(DatasetFormatError):
    pass


class ShapeMismatchError(DatasetFormatError):
    pass


@dataclass(frozen=True)
class MultipathParams:
    """Single multipath replica relative to the direct path."""

    alpha: float  # amplitude attenuation ratio; 0 is a degenerate no-op replica
    dtau_chips: float  # extra code delay, >= 0
    df_hz: float  # doppler difference
    dtheta_rad: float  # carrier phase difference

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.dtau_chips < 0:
            raise ValueError(f"dtau_chips must be >= 0, got {self.dtau_chips}")


@dataclass(frozen=True)
class ScenarioParams:
    """Full description of one sample: main-path epoch plus optional replica."""

    epoch: EpochParams
    mp: Optional[MultipathParams] = None

    @property
    def label(self) -> int:
        return int(self.mp is not None)


class Grid:
    """Evaluation grid over (doppler error, code delay error)."""

    def __init__(self, n: int, ti: float):
        if n < 2:
            raise ValueError(f"grid needs at least 2 points per axis, got {n}")
        self.n = n
        self.ti = ti
        self.doppler_axis = np.linspace(-1.0 / ti, 1.0 / ti, n)
        self.code_axis = np.linspace(-1.0, 1.0, n)


def make_grid(n: int, ti: float) -> Grid:
    """n evenly spaced points on doppler [-1/Ti, 1/Ti] and code [-1, 1]."""
    return Grid(n, ti)


@dataclass
class Snapshot:
    """One 2xNxN I/Q tensor (channel 0 = I, channel 1 = Q) with label."""

    tensor: np.ndarray
    label: int
    scenario: Optional[ScenarioParams] = None


@dataclass
class TapSeries:
    """W epochs of I^2+Q^2 sampled at 13 code-axis taps, zero doppler error."""

    ti: float
    taps: np.ndarray  # (w_epochs, 13)
    label: int
    scenario: Optional[ScenarioParams] = None

    @property
    def w_epochs(self) -> int:
        return self.taps.shape[0]


@dataclass(frozen=True)
class ScenarioSpace:
    """Sampling distribution for one dataset cell.

    dtheta_deg may be a single fixed offset or a sequence to draw from
    uniformly per Category-B sample.
    """

    ti: float
    cn0_dbhz: float
    n: int = 10
    dtheta_deg: float | Sequence[float] = 0.0
    alpha_range: tuple = (0.5, 0.9)
    dtau_range: tuple = (0.1, 0.8)
    df_range: tuple = (0.0, 1000.0)
    w_epochs: int = 20

    def __post_init__(self):
        for name in ("alpha_range", "dtau_range", "df_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} is empty: ({lo}, {hi})")
        if not 0.0 < self.alpha_range[0] <= self.alpha_range[1] <= 1.0:
            raise ValueError(f"alpha_range outside (0, 1]: {self.alpha_range}")
        if self.dtau_range[0] < 0:
            raise ValueError(f"dtau_range must be >= 0: {self.dtau_range}")
        if not np.iterable(self.dtheta_deg) and not math.isfinite(self.dtheta_deg):
            raise ValueError("dtheta_deg must be finite")
        if np.iterable(self.dtheta_deg) and len(tuple(self.dtheta_deg)) == 0:
            raise ValueError("dtheta_deg choice list is empty")


def sample_scenario(
    space: ScenarioSpace, label: int, rng: np.random.Generator
) -> ScenarioParams:
    """Draw one scenario; the main path sits exactly at the grid origin."""
    epoch = EpochParams(ti=space.ti, cn0_dbhz=space.cn0_dbhz)
    if label == 0:
        return ScenarioParams(epoch=epoch)
    alpha = rng.uniform(*space.alpha_range)
    dtau = rng.uniform(*space.dtau_range)
    df = rng.uniform(*space.df_range)
    if np.iterable(space.dtheta_deg):
        choices = tuple(space.dtheta_deg)
        dtheta = choices[rng.integers(len(choices))]
    else:
        dtheta = float(space.dtheta_deg)
    mp = MultipathParams(
        alpha=alpha, dtau_chips=dtau, df_hz=df, dtheta_rad=math.radians(dtheta)
    )
    return ScenarioParams(epoch=epoch, mp=mp)


def _field_pair(scenario: ScenarioParams, doppler_err, code_err):
    """Main-path and optional replica (I, Q) arrays, float32 each.

    Terms are cast to float32 individually so a rendered tensor is the
    exact float32 sum of its parts (testable superposition).
    """
    e = scenario.epoch
    i_main, q_main = clean_iq_field(
        e.ti, e.cn0_dbhz, e.d_bit, e.phase_err, doppler_err, code_err
    )
    main = np.stack([i_main, q_main]).astype(np.float32)
    if scenario.mp is None:
        return main, None
    mp = scenario.mp
    i_mp, q_mp = clean_iq_field(
        e.ti,
        e.cn0_dbhz,
        e.d_bit,
        e.phase_err + mp.dtheta_rad,
        np.asarray(doppler_err) - mp.df_hz,
        np.asarray(code_err) - mp.dtau_chips,
        scale=mp.alpha,
    )
    return main, np.stack([i_mp, q_mp]).astype(np.float32)


def render_snapshot(
    scenario: ScenarioParams, grid: Grid, rng: Optional[np.random.Generator] = None
) -> Snapshot:
    """Evaluate the scenario over the grid; rng None renders noiselessly."""
    if not math.isclose(scenario.epoch.ti, grid.ti):
        raise ValueError(
            f"scenario ti {scenario.epoch.ti} does not match grid ti {grid.ti}"
        )
    f_err, c_err = np.meshgrid(grid.doppler_axis, grid.code_axis, indexing="ij")
    main, replica = _field_pair(scenario, f_err, c_err)
    tensor = main
    if replica is not None:
        tensor = tensor + replica
    if rng is not None:
        sigma = noise_sigma(scenario.epoch)
        noise = (sigma * rng.standard_normal(tensor.shape)).astype(np.float32)
        tensor = tensor + noise
    return Snapshot(tensor=tensor, label=scenario.label, scenario=scenario)


def render_tap_series(
    scenario: ScenarioParams,
    w_epochs: int,
    rng: Optional[np.random.Generator] = None,
) -> TapSeries:
    """I^2+Q^2 at the 13 code taps for w_epochs epochs, fresh noise each."""
    if w_epochs < 2:
        raise ValueError(f"w_epochs must be >= 2, got {w_epochs}")
    main, replica = _field_pair(scenario, 0.0, TAP_CODE_AXIS)
    clean = main if replica is None else main + replica  # (2, 13) float32
    sigma = noise_sigma(scenario.epoch)
    taps = np.empty((w_epochs, TAP_COUNT))
    for w in range(w_epochs):
        iq = clean.astype(np.float64)
        if rng is not None:
            iq = iq + sigma * rng.standard_normal(iq.shape)
        taps[w] = iq[0] ** 2 + iq[1] ** 2
    return TapSeries(
        ti=scenario.epoch.ti, taps=taps, label=scenario.label, scenario=scenario
    )


@dataclass
class Dataset:
    """Stacked snapshots: tensors (S, 2, N, N) float32, labels (S,) uint8."""

    tensors: np.ndarray
    labels: np.ndarray
    n: int
    ti: float
    scenarios: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.labels.shape[0]


def derived_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for (seed, key...); stable across schedulers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def draw_scenarios(
    space: ScenarioSpace, n_per_class: int, seed: int
) -> list[ScenarioParams]:
    """Alternating Category A/B scenarios, one derived stream per sample."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    out = []
    for i in range(2 * n_per_class):
        label = i % 2
        out.append(sample_scenario(space, label, derived_rng(seed, i, 0)))
    return out


def build_dataset(
    space: ScenarioSpace,
    n_per_class: int,
    seed: int,
    noisy: bool = True,
    keep_scenarios: bool = True,
    scenarios: Optional[list[ScenarioParams]] = None,
) -> Dataset:
    """Balanced labeled dataset of 2*n_per_class snapshots.

    An explicit scenario list (e.g. shared with a tap-series render)
    overrides the internal draw.
    """
    if scenarios is None:
        scenarios = draw_scenarios(space, n_per_class, seed)
    grid = make_grid(space.n, space.ti)
    tensors = np.empty((len(scenarios), 2, space.n, space.n), dtype=np.float32)
    labels = np.empty(len(scenarios), dtype=np.uint8)
    for i, sc in enumerate(scenarios):
        rng = derived_rng(seed, i, 1) if noisy else None
        snap = render_snapshot(sc, grid, rng)
        tensors[i] = snap.tensor
        labels[i] = snap.label
    meta = {
        "ti": space.ti,
        "cn0_dbhz": space.cn0_dbhz,
        "n": space.n,
        "seed": seed,
        "n_per_class": n_per_class,
    }
    return Dataset(
        tensors=tensors,
        labels=labels,
        n=space.n,
        ti=space.ti,
        scenarios=scenarios if keep_scenarios else None,
        meta=meta,
    )


def build_tap_series_set(
    space: ScenarioSpace,
    n_per_class: int,
    seed: int,
    scenarios: Optional[list[ScenarioParams]] = None,
    noisy: bool = True,
) -> list[TapSeries]:
    """Tap series from the given scenarios (drawn fresh when omitted).

    Passing the scenario list of a snapshot dataset yields the paired
    sample-for-sample view used in benchmark comparisons.
    """
    if scenarios is None:
        scenarios = draw_scenarios(space, n_per_class, seed)
    out = []
    for i, sc in enumerate(scenarios):
        rng = derived_rng(seed, i, 2) if noisy else None
        out.append(render_tap_series(sc, space.w_epochs, rng))
    return out


def write_dataset(ds: Dataset, path) -> None:
    """Binary snapshot file plus a JSON manifest sidecar ('<path>.json')."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIIII", FORMAT_VERSION, len(ds), ds.n, 2, 1))
        for i in range(len(ds)):
            f.write(struct.pack("<B", int(ds.labels[i])))
            f.write(ds.tensors[i].astype("<f4", copy=False).tobytes())
    manifest = dict(ds.meta)
    manifest.setdefault("n", ds.n)
    manifest.setdefault("ti", ds.ti)
    with open(str(path) + ".json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def read_dataset(path) -> Dataset:
    """Inverse of write_dataset; raises on malformed files."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    header = raw[4:24]
    if len(header) < 20:
        raise TruncatedPayloadError("file ends inside the header")
    version, n_samples, n, channels, label_width = struct.unpack("<IIIII", header)
    if version != FORMAT_VERSION:
        raise ShapeMismatchError(f"unsupported format version {version}")
    if channels != 2 or label_width != 1:
        raise ShapeMismatchError(
            f"expected 2 channels / 1-byte labels, got {channels}/{label_width}"
        )
    record = 1 + 2 * n * n * 4
    payload = raw[24:]
    if len(payload) != n_samples * record:
        raise TruncatedPayloadError(
            f"expected {n_samples * record} payload bytes, got {len(payload)}"
        )
    tensors = np.empty((n_samples, 2, n, n), dtype=np.float32)
    labels = np.empty(n_samples, dtype=np.uint8)
    for i in range(n_samples):
        off = i * record
        labels[i] = payload[off]
        tensors[i] = np.frombuffer(
            payload, dtype="<f4", count=2 * n * n, offset=off + 1
        ).reshape(2, n, n)
    meta = {}
    try:
        with open(str(path) + ".json") as f:
            meta = json.load(f)
    except (OSError, json.JSONDecodeError):
        pass
    return Dataset(
        tensors=tensors, labels=labels, n=n, ti=float(meta.get("ti", 0.0)), meta=meta
    )
