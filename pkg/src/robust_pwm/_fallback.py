"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""
import numpy as np


def block_weighted_sums(X, order, offsets, W):
    X = np.asarray(X, dtype=np.float64)
    K = len(offsets) - 1
    out = np.empty((X.shape[0], K))
    for j in range(K):
        lo, hi = offsets[j], offsets[j + 1]
        block = np.sort(X[:, order[lo:hi]], axis=1)
        # left-to-right accumulation: same rounding for any number of rows
        acc = np.zeros(X.shape[0])
        for i in range(hi - lo):
            acc += W[j, i] * block[:, i]
        out[:, j] = acc
    return out


def row_lower_median(E):
    E = np.asarray(E, dtype=np.float64)
    mid = (E.shape[1] - 1) // 2
    return np.sort(E, axis=1)[:, mid]
