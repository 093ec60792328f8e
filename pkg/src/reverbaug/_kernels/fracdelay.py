"""Band-limited placement of weighted impulses at fractional delays.

A windowed sinc (Hann window spanning ``taps`` samples) is written around each
delay. ``taps <= 1`` falls back to rounding to the nearest sample.
"""
import math

import numpy as np

from .._backend import njit, pick


@njit
def _write_impulse(out, delay, amp, taps):
    n = out.shape[0]
    if taps <= 1:
        k = int(math.floor(delay + 0.5))
        if 0 <= k < n:
            out[k] += amp
        return
    base = int(math.floor(delay))
    frac = delay - base
    half = taps // 2
    s = math.sin(math.pi * frac)
    for m in range(-half + 1, half + 1):
        k = base + m
        if k < 0 or k >= n:
            continue
        x = m - frac
        if x == 0.0:
            out[k] += amp
            continue
        # sin(pi*(m - frac)) = -(-1)^m sin(pi*frac)
        sgn = -1.0 if (m % 2 == 0) else 1.0
        val = sgn * s / (math.pi * x)
        win = 0.5 * (1.0 + math.cos(2.0 * math.pi * x / taps))
        out[k] += amp * val * win


@njit
def accumulate_impulses_numba(out, delays, amps, taps):
    for i in range(delays.shape[0]):
        _write_impulse(out, delays[i], amps[i], taps)
    return out


def accumulate_impulses_numpy(out, delays, amps, taps):
    n = out.shape[0]
    delays = np.asarray(delays, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.float64)
    if delays.size == 0:
        return out
    if taps <= 1:
        k = np.floor(delays + 0.5).astype(np.int64)
        ok = (k >= 0) & (k < n)
        out += np.bincount(k[ok], weights=amps[ok], minlength=n)[:n]
        return out
    half = taps // 2
    base = np.floor(delays).astype(np.int64)
    frac = delays - base
    m = np.arange(-half + 1, half + 1)
    k = base[:, None] + m[None, :]
    x = m[None, :] - frac[:, None]
    vals = amps[:, None] * np.sinc(x) * 0.5 * (1.0 + np.cos(2.0 * np.pi * x / taps))
    ok = (k >= 0) & (k < n)
    out += np.bincount(k[ok], weights=vals[ok], minlength=n)[:n]
    return out


_impl = pick(accumulate_impulses_numba, accumulate_impulses_numpy)


def accumulate_impulses(out, delays, amps, taps=32):
    """Add ``amps[i]`` at fractional sample delay ``delays[i]`` into ``out`` in place."""
    return _impl(out, np.ascontiguousarray(delays, dtype=np.float64),
                 np.ascontiguousarray(amps, dtype=np.float64), int(taps))
