"""Backend selection for the hot loops.

The compiled ``_core`` extension is used when it imports; setting
``ROBUST_PWM_PURE_PYTHON=1`` forces the numpy fallback.

Both backends sort each block and accumulate its weighted sum left to right,
so they return bit-identical results. That makes it safe to route large
batches to numpy even when the extension is present: numpy's vectorised
row sort overtakes the scalar C++ sort beyond a few dozen rows
(see ``benchmarks/bench_kernels.py``).
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("ROBUST_PWM_PURE_PYTHON", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None

BACKEND = "compiled" if _core is not None else "python"
BACKENDS = ("auto", "python", "compiled")
#: batches with at least this many rows go to the numpy sort under "auto"
ROW_CROSSOVER = 48


def block_weighted_sums(X, order, offsets, W, backend=None):
    """Per-row, per-block weighted sums of sorted block values, shape (R, K)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    impl = _select(backend, X.shape[0])
    return impl.block_weighted_sums(
        X,
        np.ascontiguousarray(order, dtype=np.intp),
        np.ascontiguousarray(offsets, dtype=np.intp),
        np.ascontiguousarray(W, dtype=np.float64),
    )


def row_lower_median(E, backend=None):
    impl = _select(backend, 0)
    return impl.row_lower_median(np.ascontiguousarray(E, dtype=np.float64))


def _select(backend, rows):
    if backend is None or backend == "auto":
        if _core is None or rows >= ROW_CROSSOVER:
            return _fallback
        return _core
    if backend == "python":
        return _fallback
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernels are not available")
        return _core
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
