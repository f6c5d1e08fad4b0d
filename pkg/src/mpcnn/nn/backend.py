"""Kernel backend selection.

The compiled extension is used when importable; otherwise the NumPy
fallback.  ``MPCNN_BACKEND=python|cython`` forces a choice at import, and
``use()`` switches at runtime (benchmarks, parity tests).
"""

import os

from . import _kernels_py

try:
    from . import _kernels_hybrid as _kernels_cy
except ImportError:  # pragma: no cover - depends on build environment
    _kernels_cy = None

_BY_NAME = {"python": _kernels_py, "cython": _kernels_cy}

kernels = None
name = None


def use(backend: str):
    """Select the active kernel backend ('python' or 'cython')."""
    global kernels, name
    mod = _BY_NAME.get(backend)
    if backend not in _BY_NAME:
        raise ValueError(f"unknown backend {backend!r}")
    if mod is None:
        raise ImportError("compiled kernels are not available; rebuild the extension")
    kernels, name = mod, backend
    return mod


def available():
    return [n for n, m in _BY_NAME.items() if m is not None]


use(os.environ.get("MPCNN_BACKEND") or ("cython" if _kernels_cy else "python"))
