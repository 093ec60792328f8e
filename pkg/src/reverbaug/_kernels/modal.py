"""Sum of exponentially damped sinusoids ``w * exp(-delta t) * sin(omega t)``."""
import math

import numpy as np

from .._backend import njit, pick


@njit
def modal_sum_numba(out, omegas, deltas, weights, fs):
    n = out.shape[0]
    dt = 1.0 / fs
    for m in range(omegas.shape[0]):
        r = math.exp(-deltas[m] * dt)
        wt = omegas[m] * dt
        a1 = 2.0 * r * math.cos(wt)
        a2 = r * r
        y2 = 0.0
        y1 = weights[m] * r * math.sin(wt)
        if n > 1:
            out[1] += y1
        floor = 1e-12 * abs(weights[m])
        for k in range(2, n):
            y = a1 * y1 - a2 * y2
            out[k] += y
            y2 = y1
            y1 = y
            if k % 256 == 0 and abs(y1) < floor and abs(y2) < floor:
                break
    return out


def modal_sum_numpy(out, omegas, deltas, weights, fs, chunk=128):
    t = np.arange(out.shape[0]) / fs
    for s in range(0, omegas.shape[0], chunk):
        om = omegas[s:s + chunk, None]
        de = deltas[s:s + chunk, None]
        wt = weights[s:s + chunk, None]
        out += np.sum(wt * np.exp(-de * t) * np.sin(om * t), axis=0)
    return out


_impl = pick(modal_sum_numba, modal_sum_numpy)


def modal_sum(n_samples, omegas, deltas, weights, fs):
    out = np.zeros(int(n_samples))
    f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    return _impl(out, f64(omegas), f64(deltas), f64(weights), float(fs))
