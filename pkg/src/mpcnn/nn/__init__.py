"""Minimal trainable neural-network engine on dense NumPy tensors.

Hot kernels (convolution, pooling) run through a compiled extension when
available, with a NumPy fallback selected at import; see ``backend``.
"""

from . import backend, layers, ops, optim
from .gradcheck import grad_check
from .optim import AdamState, adam_step

__all__ = ["backend", "layers", "ops", "optim", "grad_check", "AdamState", "adam_step"]
