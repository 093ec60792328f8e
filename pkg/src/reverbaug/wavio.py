"""Mono WAV read/write (16-bit PCM and 32-bit float) on top of scipy."""
import numpy as np
from scipy.io import wavfile


def write_wav(path, samples, sample_rate, *, subtype="PCM_16"):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("only mono audio is supported")
    if not np.all(np.isfinite(x)):
        raise ValueError("refusing to write non-finite samples")
    if subtype == "PCM_16":
        data = np.round(np.clip(x, -1.0, 32767 / 32768) * 32768).astype(np.int16)
    elif subtype == "FLOAT":
        data = x.astype(np.float32)
    else:
        raise ValueError(f"unsupported WAV subtype {subtype!r}")
    wavfile.write(str(path), int(sample_rate), data)


def read_wav(path):
    """Return ``(samples as float64 in [-1, 1], sample_rate)``."""
    sr, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    return x, int(sr)
