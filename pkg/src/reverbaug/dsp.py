"""Signal primitives: fast convolution, noise generation and SNR-controlled mixing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as _sig

NOISE_KINDS = ("white", "colored", "file")


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("Signal samples must be 1-D")
        if not np.all(np.isfinite(x)):
            raise ValueError("Signal contains non-finite samples")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class MixSpec:
    """How one noise realisation is drawn and scaled.

    Parameters
    ----------
    snr_db : float
        Target speech-to-noise ratio over speech-active samples.
    noise_kind : {"white", "colored", "file"}
    slope_db_per_octave : float
        Power spectral slope of colored noise (-3 is pink, -6 brown).
    noise_path : str, optional
        Recording used when ``noise_kind == "file"`` (babble, music, ...).
    seed : int
    """

    snr_db: float
    noise_kind: str = "white"
    slope_db_per_octave: float = -3.0
    noise_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not np.isfinite(self.slope_db_per_octave):
            raise ValueError("slope_db_per_octave must be finite")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"noise_kind must be one of {NOISE_KINDS}, got {self.noise_kind!r}")
        if self.noise_kind == "file" and not self.noise_path:
            raise ValueError("file-sourced noise needs noise_path")
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)


def _samples(x):
    return x.samples if hasattr(x, "samples") else np.asarray(x, dtype=np.float64)


def convolve(x, h):
    """Full linear convolution ``x * h`` by overlap-add FFT.

    ``h`` may be a :class:`Signal` or an ``Rir``; both carry ``sample_rate``.
    Output length is ``len(x) + len(h) - 1``.
    """
    if x.sample_rate != h.sample_rate:
        raise ValueError(f"sample-rate mismatch: signal {x.sample_rate} Hz, "
                         f"impulse response {h.sample_rate} Hz")
    a, b = _samples(x), _samples(h)
    if a.size == 0 or b.size == 0:
        raise ValueError("cannot convolve empty sequences")
    return Signal(_sig.oaconvolve(a, b, mode="full"), x.sample_rate)


def _colored(white, sample_rate, slope_db_per_octave):
    """Shape white noise to a power spectrum ``~ f ** (slope / (10 log10 2))``."""
    n = white.size
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    expo = slope_db_per_octave / (20.0 * np.log10(2.0))
    amp = np.empty_like(f)
    amp[1:] = f[1:] ** expo
    amp[0] = 0.0  # no DC
    y = np.fft.irfft(spec * amp, n)
    sd = y.std()
    return y / sd if sd > 0 else y


def _tile(source, length, rng):
    if source.size == 0:
        raise ValueError("noise recording is empty")
    offset = int(rng.integers(source.size))
    return np.resize(np.roll(source, -offset), length)


def generate_noise(kind, length, sample_rate, seed, *, slope_db_per_octave=-3.0,
                   source=None):
    """White, power-law colored, or file-sourced noise of ``length`` samples.

    White noise is i.i.d. standard Gaussian. Colored noise is white noise
    filtered in the frequency domain and rescaled to unit variance. File noise
    tiles ``source`` (a :class:`Signal` or a WAV path) from a random offset.
    """
    length = int(length)
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    if kind == "white":
        return Signal(rng.standard_normal(length), sample_rate)
    if kind == "colored":
        return Signal(_colored(rng.standard_normal(length), sample_rate, slope_db_per_octave),
                      sample_rate)
    if kind == "file":
        if source is None:
            raise ValueError("file-sourced noise needs a source recording")
        if not hasattr(source, "samples"):
            from .wavio import read_wav
            x, sr = read_wav(source)
            source = Signal(x, sr)
        if source.sample_rate != sample_rate:
            raise ValueError(f"noise recording is {source.sample_rate} Hz, need {sample_rate} Hz")
        return Signal(_tile(source.samples, length, rng), sample_rate)
    raise ValueError(f"unknown noise kind {kind!r}; choose from {NOISE_KINDS}")


def noise_for(spec: MixSpec, length, sample_rate):
    return generate_noise(spec.noise_kind, length, sample_rate, spec.seed,
                          slope_db_per_octave=spec.slope_db_per_octave, source=spec.noise_path)


def expand_mask(mask, n_samples, sample_rate, frame_ms=25.0, hop_ms=10.0):
    """Per-sample boolean mask from either a per-sample or a per-frame mask.

    A sample counts as speech when any speech frame covers it.
    """
    m = np.asarray(mask, dtype=bool)
    if m.size == n_samples:
        return m
    frame = int(round(frame_ms * 1e-3 * sample_rate))
    hop = int(round(hop_ms * 1e-3 * sample_rate))
    if m.size != (n_samples - frame) // hop + 1:
        raise ValueError(f"mask of length {m.size} matches neither {n_samples} samples nor "
                         f"their {frame}/{hop}-sample frames")
    out = np.zeros(n_samples, dtype=bool)
    for i in np.flatnonzero(m):
        out[i * hop:i * hop + frame] = True
    return out


def masked_power(x, mask):
    x = _samples(x)
    return float(np.mean(x[mask] ** 2))


def measure_snr(speech, noise, mask):
    """``10 log10(P_speech / P_noise)`` with both powers taken over ``mask``."""
    return 10.0 * np.log10(masked_power(speech, mask) / masked_power(noise, mask))


def snr_gain(speech, noise, snr_db, mask):
    """Gain ``g`` such that ``g * noise`` sits ``snr_db`` below ``speech`` over ``mask``."""
    if not np.any(mask):
        raise ValueError("speech mask selects no samples")
    ps = masked_power(speech, mask)
    if not ps > 0:
        raise ValueError("speech is silent over the mask")
    pn = masked_power(noise, mask)
    if not pn > 0:
        raise ValueError("noise is silent over the speech mask")
    return float(np.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(speech, noise, spec, speech_mask, *, return_gain=False):
    """Add ``noise`` to ``speech`` at ``spec.snr_db`` over the whole utterance.

    The power reference for both signals is the set of speech-active samples,
    given either per sample or per 25 ms / 10 ms frame. Shorter noise is tiled.

    Returns
    -------
    Signal, or ``(Signal, gain)`` when ``return_gain``.
    """
    if speech.sample_rate != noise.sample_rate:
        raise ValueError("speech and noise sample rates differ")
    s = speech.samples
    n = noise.samples
    if n.size == 0:
        raise ValueError("noise is empty")
    if n.size < s.size:
        n = np.resize(n, s.size)
    n = n[:s.size]
    mask = expand_mask(speech_mask, s.size, speech.sample_rate)
    g = snr_gain(s, n, spec.snr_db, mask)
    out = Signal(s + g * n, speech.sample_rate)
    return (out, g) if return_gain else out
