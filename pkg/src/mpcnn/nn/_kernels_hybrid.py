"""Shape-adaptive kernel dispatch for the compiled backend.

The compiled row-stencil wins on wide feature maps where its inner loops
fill the vector lanes; the BLAS im2col path wins on small maps with many
channels, where the matrix product does the work.  Thresholds were
measured on the training layer shapes (see benchmarks/bench_kernels.py).
"""

from . import _kernels as _stencil
from . import _kernels_py as _gemm

STENCIL_MIN_CELLS = 400  # fwd / input-gradient crossover (spatial cells)
STENCIL_MIN_CELLS_WGRAD = 1024  # weight gradient prefers BLAS until ~32x32


def conv2d_fwd(x, k, b):
    mod = _stencil if x.shape[2] * x.shape[3] >= STENCIL_MIN_CELLS else _gemm
    return mod.conv2d_fwd(x, k, b)


def conv2d_bwd_x(gout, k):
    mod = _stencil if gout.shape[2] * gout.shape[3] >= STENCIL_MIN_CELLS else _gemm
    return mod.conv2d_bwd_x(gout, k)


def conv2d_bwd_k(x, gout, co_count):
    mod = _stencil if x.shape[2] * x.shape[3] >= STENCIL_MIN_CELLS_WGRAD else _gemm
    return mod.conv2d_bwd_k(x, gout, co_count)


maxpool2d_fwd = _stencil.maxpool2d_fwd
maxpool2d_bwd = _stencil.maxpool2d_bwd
