"""Experiment configuration: desk-scale defaults with full-scale flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

ALL_DISCRETIZATIONS = (4, 6, 8, 10, 20, 30, 40)
ALL_CN0 = (20.0, 30.0, 40.0, 50.0, 60.0)
ALL_DTHETA = (0.0, 45.0, 90.0, 180.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """One campaign's sweep lists, sampling ranges, and sizes.

    Desk-scale defaults keep a single campaign tractable on one CPU;
    ``full_scale()`` restores the 20-run, 2000/500-sample setting.
    """

    ti_ms: float = 1.0
    cn0_list: tuple = ALL_CN0
    dtheta_list_deg: tuple = (0.0,)
    n_list: tuple = (4, 8, 10, 40)  # type-1 sweep
    n_type2: int = 10
    alpha_range: tuple = (0.5, 0.9)
    dtau_range_chips: tuple = (0.1, 0.8)
    df_range_hz: tuple = (0.0, 1000.0)
    runs: int = 5
    train_per_class: int = 800
    test_per_class: int = 200
    epochs: int = 30
    batch_size: int = 32
    w_epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.ti_ms not in (1.0, 20.0):
            raise ValueError(f"ti_ms must be 1 or 20, got {self.ti_ms}")
        for name in ("cn0_list", "dtheta_list_deg", "n_list"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} is empty")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if min(self.train_per_class, self.test_per_class) < 1:
            raise ValueError("dataset sizes must be >= 1")

    @property
    def ti(self) -> float:
        return self.ti_ms * 1e-3

    def full_scale(self) -> "ExperimentConfig":
        return replace(
            self,
            runs=20,
            train_per_class=2000,
            test_per_class=500,
            n_list=ALL_DISCRETIZATIONS,
            dtheta_list_deg=ALL_DTHETA,
        )

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            raw = json.load(f)
        lists = {
            k: tuple(v)
            for k, v in raw.items()
            if isinstance(v, list)
        }
        raw.update(lists)
        return cls(**raw)


def desk_type1_config(**overrides) -> ExperimentConfig:
    """Type-1 default: single mid-strength C/N0 where the discretization
    trend is measurable below the accuracy ceiling."""
    base = dict(cn0_list=(40.0,), dtheta_list_deg=(0.0,), n_list=(4, 8, 10, 40))
    base.update(overrides)
    return ExperimentConfig(**base)


def desk_type2_config(**overrides) -> ExperimentConfig:
    """Type-2 default: full C/N0 sweep at N = 10 against the SVM."""
    base = dict(cn0_list=ALL_CN0, dtheta_list_deg=(0.0,))
    base.update(overrides)
    return ExperimentConfig(**base)
