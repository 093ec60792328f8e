"""Direct O(N*M) time-domain convolution, the reference for the FFT path."""
import numpy as np

from .._backend import njit, pick


@njit
def direct_convolve_numba(x, h):
    n = x.shape[0]
    m = h.shape[0]
    out = np.zeros(n + m - 1)
    for i in range(n):
        xi = x[i]
        if xi == 0.0:
            continue
        for j in range(m):
            out[i + j] += xi * h[j]
    return out


def direct_convolve_numpy(x, h):
    # np.convolve is a direct (non-FFT) sum, which is what the oracle needs.
    return np.convolve(x, h, mode="full")


_impl = pick(direct_convolve_numba, direct_convolve_numpy)


def direct_convolve(x, h):
    x = np.ascontiguousarray(x, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    if x.size == 0 or h.size == 0:
        raise ValueError("cannot convolve empty sequences")
    return _impl(x, h)
