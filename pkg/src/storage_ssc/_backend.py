"""Pick the path kernel at import time.

``STORAGE_SSC_BACKEND`` may be ``compiled``, ``python`` or ``auto`` (default):
``auto`` uses the compiled kernel when it was built and the numpy one otherwise.
"""
from __future__ import annotations

import os

from . import _mc_fallback

try:
    from . import _mc_kernel
except ImportError:  # extension not built
    _mc_kernel = None

BACKENDS = ("compiled", "python")


def available() -> tuple:
    return BACKENDS if _mc_kernel is not None else ("python",)


def kernel(name: str | None = None):
    """The module providing ``simulate_pairs`` for backend ``name``."""
    name = name or os.environ.get("STORAGE_SSC_BACKEND", "auto")
    if name == "auto":
        name = "compiled" if _mc_kernel is not None else "python"
    if name == "compiled":
        if _mc_kernel is None:
            raise ImportError("the compiled kernel is not built; reinstall with Cython available")
        return _mc_kernel
    if name == "python":
        return _mc_fallback
    raise ValueError(f"unknown backend {name!r}; expected one of auto, compiled, python")


DEFAULT = "compiled" if _mc_kernel is not None else "python"
