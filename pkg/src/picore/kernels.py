"""Kernel selection: the compiled module when built, else the pure-Python one.

Set ``PICORE_PURE=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("PICORE_PURE") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def compose(a, b):
    return _impl.compose(np.ascontiguousarray(a, dtype=np.uint8), np.ascontiguousarray(b, dtype=np.uint8))


def grouped_mismatch(e1, e2, ob, group):
    return _impl.grouped_mismatch(
        np.ascontiguousarray(e1, dtype=np.uint8),
        np.ascontiguousarray(e2, dtype=np.uint8),
        np.ascontiguousarray(ob, dtype=np.int64),
        np.ascontiguousarray(group, dtype=np.int64),
    )
