"""Linear-phase FIR filter banks whose bands sum to a pure delay."""
import numpy as np
from scipy import signal


def band_edges(centers):
    c = np.asarray(centers, dtype=np.float64)
    return np.sqrt(c[:-1] * c[1:])


def complementary_bank(edges, fs, numtaps):
    """Band filters ``(len(edges) + 1, numtaps)`` splitting at ``edges`` (Hz).

    Each band is a difference of windowed-sinc lowpass filters, so the sum over
    bands telescopes to a unit impulse at the centre tap.
    """
    edges = np.atleast_1d(np.asarray(edges, dtype=np.float64))
    nyq = fs / 2.0
    if np.any(edges <= 0) or np.any(edges >= nyq) or np.any(np.diff(edges) <= 0):
        raise ValueError(f"band edges must be increasing and inside (0, {nyq}) Hz, got {edges}")
    if numtaps % 2 == 0:
        raise ValueError("numtaps must be odd")
    lows = [signal.firwin(numtaps, e, fs=fs) for e in edges]
    delta = np.zeros(numtaps)
    delta[numtaps // 2] = 1.0
    bank = [lows[0]]
    bank += [b - a for a, b in zip(lows, lows[1:])]
    bank.append(delta - lows[-1])
    bank = np.array(bank)
    # flat-response check: the bands must recombine to the delayed impulse
    err = np.max(np.abs(bank.sum(axis=0) - delta))
    if err > 1e-12:
        raise RuntimeError(f"filter bank does not sum to unity (max error {err:.2e})")
    return bank


def apply_bank(band_signals, bank):
    """Filter each row with its band filter (zero-phase alignment) and sum."""
    band_signals = np.atleast_2d(band_signals)
    n = band_signals.shape[1]
    half = bank.shape[1] // 2
    out = np.zeros(n)
    for x, f in zip(band_signals, bank):
        out += signal.oaconvolve(x, f)[half:half + n]
    return out
