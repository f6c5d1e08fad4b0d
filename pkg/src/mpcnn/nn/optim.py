"""Adam with bias correction and a linear learning-rate ramp."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Optimizer state: moment accumulators plus the learning-rate plan.

    The learning rate ramps linearly from lr_start (first step) to
    lr_end (step total_steps); a single-step plan just uses lr_start.
    """

    shapes: list
    lr_start: float = 1e-3
    lr_end: float = 1e-4
    total_steps: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dtype: np.dtype = np.float32
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros(s, dtype=self.dtype) for s in self.shapes]
            self.v = [np.zeros(s, dtype=self.dtype) for s in self.shapes]

    def learning_rate(self) -> float:
        """Rate for the upcoming step (0-indexed by completed steps)."""
        if self.total_steps <= 1:
            return self.lr_start
        t = min(self.step, self.total_steps - 1)
        return self.lr_start + (self.lr_end - self.lr_start) * t / (
            self.total_steps - 1
        )


def adam_step(params, grads, state: AdamState):
    """One in-place Adam update over matching parameter/gradient lists."""
    lr = state.learning_rate()
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"param/grad shape mismatch: {p.shape} vs {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state
