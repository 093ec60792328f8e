"""Frame features, an energy-threshold VAD and a logistic-regression frame classifier."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .acoustics.models import OCTAVE_CENTERS
from .errors import TrainingError

ENERGY_FLOOR_DB = -100.0
MODEL_FORMAT = "reverbaug-vad/1"
_EPS = 1e-20


@dataclass(frozen=True)
class FrameSpec:
    """Analysis frames. The taper is a periodic Hann window."""

    frame_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.frame_ms:
            raise ValueError(f"need 0 < hop <= frame, got {self.hop_ms} / {self.frame_ms} ms")
        if self.window not in ("hann", "rect"):
            raise ValueError(f"window must be 'hann' or 'rect', got {self.window!r}")

    def frame_length(self, sample_rate):
        return int(round(self.frame_ms * 1e-3 * sample_rate))

    def hop(self, sample_rate):
        return int(round(self.hop_ms * 1e-3 * sample_rate))

    def n_frames(self, n_samples, sample_rate):
        frame = self.frame_length(sample_rate)
        if n_samples < frame:
            return 0
        return (n_samples - frame) // self.hop(sample_rate) + 1

    def taper(self, n):
        if self.window == "rect":
            return np.ones(n)
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def frames(x, spec, sample_rate):
    frame = spec.frame_length(sample_rate)
    if x.size < frame:
        raise ValueError(f"signal of {x.size} samples is shorter than one {frame}-sample frame")
    return sliding_window_view(x, frame)[::spec.hop(sample_rate)]


def frame_energy_db(x, spec, sample_rate):
    fr = frames(x, spec, sample_rate)
    p = np.mean(fr * fr, axis=1)
    with np.errstate(divide="ignore"):
        e = 10.0 * np.log10(p)
    return np.maximum(e, ENERGY_FLOOR_DB)


def _band_edges(sample_rate):
    c = np.asarray(OCTAVE_CENTERS)
    inner = np.sqrt(c[:-1] * c[1:])
    return np.concatenate([[0.0], inner, [sample_rate / 2 + 1.0]])


def frame_features(x, spec, sample_rate):
    """Per-frame base features.

    Columns: log energy (dB, floored), zero-crossing rate, spectral flatness,
    spectral centroid (Hz), then the energy share of each octave band.
    """
    fr = frames(x, spec, sample_rate)
    n = fr.shape[1]
    p = np.mean(fr * fr, axis=1)
    with np.errstate(divide="ignore"):
        energy = np.maximum(10.0 * np.log10(p), ENERGY_FLOOR_DB)
    sgn = np.signbit(fr)
    zcr = np.count_nonzero(sgn[:, 1:] != sgn[:, :-1], axis=1) / (n - 1)

    spec_pow = np.abs(np.fft.rfft(fr * spec.taper(n), axis=1)) ** 2
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    total = spec_pow.sum(axis=1)
    # floored power keeps the geometric mean finite; digital silence gives flatness 1
    floored = spec_pow + _EPS
    flatness = np.exp(np.mean(np.log(floored), axis=1)) / np.mean(floored, axis=1)
    safe = np.where(total > 0, total, 1.0)
    centroid = np.where(total > 0, spec_pow @ f / safe, 0.0)

    edges = _band_edges(sample_rate)
    which = np.searchsorted(edges, f, side="right") - 1
    bands = np.stack([spec_pow[:, which == b].sum(axis=1) for b in range(len(edges) - 1)], axis=1)
    bands = np.where(total[:, None] > 0, bands / safe[:, None], 0.0)
    return np.column_stack([energy, zcr, flatness, centroid, bands])


def stack_context(feats, k):
    """Concatenate each frame with its ``k`` neighbours on both sides (edges replicated)."""
    if k == 0:
        return feats
    n = feats.shape[0]
    idx = np.clip(np.arange(n)[:, None] + np.arange(-k, k + 1)[None, :], 0, n - 1)
    return feats[idx].reshape(n, -1)


def extract_features(signal, spec=FrameSpec(), context=2):
    """Feature matrix ``(n_frames, 10 * (2 * context + 1))`` and frame centre times."""
    x = signal.samples
    sr = signal.sample_rate
    if x.size == 0:
        raise ValueError("empty signal")
    feats = stack_context(frame_features(x, spec, sr), context)
    frame = spec.frame_length(sr)
    times = (np.arange(feats.shape[0]) * spec.hop(sr) + frame / 2) / sr
    return feats, times


def frame_labels(labels, spec, n_frames, sample_rate=16000):
    """Frame ``i`` is speech iff at least half of its span overlaps speech segments."""
    frame = spec.frame_length(sample_rate) / sample_rate
    start = np.arange(n_frames) * spec.hop(sample_rate) / sample_rate
    stop = start + frame
    overlap = np.zeros(n_frames)
    for a, b in labels.segments:
        overlap += np.clip(np.minimum(stop, b) - np.maximum(start, a), 0.0, None)
    return overlap >= 0.5 * frame - 1e-9


def energy_vad(signal, spec=FrameSpec(), threshold_db=10.0):
    """Frames louder than the 10th-percentile energy by more than ``threshold_db``."""
    e = frame_energy_db(signal.samples, spec, signal.sample_rate)
    floor = np.percentile(e, 10)
    return e > floor + threshold_db


# ---------------------------------------------------------------- logistic regression

def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def loss_and_grad(params, X, y, l2):
    """Mean log loss plus ``l2/2 * |w|^2`` and its gradient; ``params = [w..., b]``."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, evaluated without overflow
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (_sigmoid(z) - y) / y.size
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return float(loss), grad


@dataclass(frozen=True, eq=False)
class VadModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.mean, dtype=np.float64)
        sc = np.asarray(self.scale, dtype=np.float64)
        if not (w.shape == mu.shape == sc.shape) or w.ndim != 1:
            raise ValueError("weights, mean and scale must be 1-D of equal length")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("model weights must be finite")
        if not np.all(sc > 0):
            raise ValueError("normalisation scales must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "scale", sc)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self):
        return self.weights.size

    def normalise(self, X):
        return (X - self.mean) / self.scale

    def to_dict(self):
        return {"format": MODEL_FORMAT, "weights": self.weights.tolist(), "bias": self.bias,
                "mean": self.mean.tolist(), "scale": self.scale.tolist(), "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        return cls(d["weights"], d["bias"], d["mean"], d["scale"], d.get("meta", {}))


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n")


def load_model(path):
    return VadModel.from_dict(json.loads(Path(path).read_text()))


def fit_normalisation(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    return mu, np.where(sd > 1e-12, sd, 1.0)


def train(X, y, *, epochs=30, lr=0.5, l2=1e-4, batch_size=256, seed=0, meta=None):
    """Mini-batch gradient descent on the L2-regularised log loss.

    Parameters
    ----------
    X : (n, d) array
        Raw features; normalisation is fitted here and stored in the model.
    y : (n,) bool or {0, 1} array
    epochs, lr, l2, batch_size, seed
        Optimiser settings. Batch order is drawn from ``seed``, so a fixed
        seed reproduces the weights bit for bit.

    Returns
    -------
    VadModel
        ``meta["loss_history"]`` holds the full-data loss after each epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (n, d) and y (n,)")
    if y.size == 0 or y.min() == y.max():
        raise TrainingError("training data must contain both speech and non-speech frames")
    mu, sd = fit_normalisation(X)
    Z = (X - mu) / sd
    rng = np.random.default_rng(seed)
    params = np.zeros(X.shape[1] + 1)
    history = []
    for _ in range(int(epochs)):
        order = rng.permutation(y.size)
        for s in range(0, y.size, int(batch_size)):
            idx = order[s:s + int(batch_size)]
            _, g = loss_and_grad(params, Z[idx], y[idx], l2)
            params -= lr * g
        history.append(loss_and_grad(params, Z, y, l2)[0])
    info = {"epochs": int(epochs), "lr": lr, "l2": l2, "batch_size": int(batch_size),
            "seed": int(seed), "n_frames": int(y.size), "loss_history": history}
    info.update(meta or {})
    return VadModel(params[:-1], params[-1], mu, sd, info)


def score(model, X):
    """Speech probabilities ``sigmoid(w . normalise(x) + b)`` per frame."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValueError(f"feature dimension {X.shape[1]} does not match model ({model.dim})")
    return _sigmoid(model.normalise(X) @ model.weights + model.bias)


def utterance_frames(utt, spec=FrameSpec(), context=2):
    """Features and frame labels for one :class:`~reverbaug.corpus.Utterance`."""
    X, _ = extract_features(utt.signal, spec, context)
    return X, frame_labels(utt.labels, spec, X.shape[0], utt.signal.sample_rate)


def dataset(utterances, spec=FrameSpec(), context=2):
    """Stack features and labels of an iterable of utterances."""
    xs, ys = [], []
    for u in utterances:
        X, y = utterance_frames(u, spec, context)
        xs.append(X)
        ys.append(y)
    if not xs:
        raise ValueError("no utterances")
    return np.concatenate(xs), np.concatenate(ys)
