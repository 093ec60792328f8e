"""Utterances with speech labels, synthetic corpora and augmented train/test sets.

Directory layout written by the builders::

    out_dir/
      manifest.jsonl      one ManifestEntry per line, sorted by (utterance_id, scenario_id)
      audio/<utt>__<scenario>.wav   16-bit PCM
      labels/<utt>__<scenario>.txt  "start end" per line, seconds
      source/<utt>.wav, source/<utt>.txt   anechoic inputs (synthetic corpora only)
      rirs/<scenario>.wav + .json   32-bit float RIRs (training sets only)
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .acoustics import Rir, simulate_rir, write_rir
from .dsp import MixSpec, Signal, convolve, mix_at_snr, noise_for
from .parallel import pmap
from .wavio import read_wav, write_wav

log = logging.getLogger(__name__)

ANECHOIC = "anechoic"
PEAK_LIMIT = 0.99


@dataclass(frozen=True)
class LabelTrack:
    """Speech segments as ``[start, end)`` pairs in seconds."""

    segments: tuple = ()

    def __post_init__(self):
        segs = tuple((float(a), float(b)) for a, b in self.segments)
        prev = -np.inf
        for a, b in segs:
            if not (np.isfinite(a) and np.isfinite(b)) or a < 0 or b <= a:
                raise ValueError(f"invalid segment [{a}, {b})")
            if a < prev:
                raise ValueError("segments must be ordered and non-overlapping")
            prev = b
        object.__setattr__(self, "segments", segs)

    def __len__(self):
        return len(self.segments)

    @property
    def end(self):
        return self.segments[-1][1] if self.segments else 0.0

    def speech_time(self):
        return float(sum(b - a for a, b in self.segments))

    def shifted(self, dt, duration):
        """Shift by ``dt`` seconds and clip to ``[0, duration)``."""
        out = []
        for a, b in self.segments:
            a, b = max(a + dt, 0.0), min(b + dt, duration)
            if b > a:
                out.append((a, b))
        return LabelTrack(out)

    def sample_mask(self, n_samples, sample_rate):
        m = np.zeros(n_samples, dtype=bool)
        for a, b in self.segments:
            m[int(round(a * sample_rate)):int(round(b * sample_rate))] = True
        return m


def read_labels(path):
    segs = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            a, b = line.split()[:2]
            segs.append((float(a), float(b)))
    return LabelTrack(segs)


def write_labels(labels, path):
    Path(path).write_text("".join(f"{a:.6f} {b:.6f}\n" for a, b in labels.segments))


@dataclass(frozen=True, eq=False)
class Utterance:
    signal: Signal
    labels: LabelTrack
    utterance_id: str
    path: Optional[str] = None

    def __post_init__(self):
        if self.labels.end > self.signal.duration + 1e-9:
            raise ValueError(f"{self.utterance_id}: labels end at {self.labels.end:.4f} s, "
                             f"after the signal ({self.signal.duration:.4f} s)")

    @property
    def speech_fraction(self):
        return self.labels.speech_time() / self.signal.duration


def load_utterance(wav_path, label_path=None, utterance_id=None):
    """Read a WAV and its segment file (same stem, ``.txt``, by default)."""
    wav_path = Path(wav_path)
    x, sr = read_wav(wav_path)
    label_path = Path(label_path) if label_path else wav_path.with_suffix(".txt")
    return Utterance(Signal(x, sr), read_labels(label_path), utterance_id or wav_path.stem,
                     str(wav_path))


def load_corpus_dir(directory):
    return [load_utterance(p) for p in sorted(Path(directory).glob("*.wav"))]


def pad_silence(utt, duration, where="append"):
    """Add ``duration`` seconds of zeros at the end, start, or half on each side."""
    if duration < 0:
        raise ValueError("padding duration must be >= 0")
    sr = utt.signal.sample_rate
    n = int(round(duration * sr))
    if n == 0:
        return utt
    if where == "append":
        pre = 0
    elif where == "prepend":
        pre = n
    elif where == "split":
        pre = n // 2
    else:
        raise ValueError(f"where must be append, prepend or split, got {where!r}")
    x = np.concatenate([np.zeros(pre), utt.signal.samples, np.zeros(n - pre)])
    total = x.size / sr
    return Utterance(Signal(x, sr), utt.labels.shifted(pre / sr, total), utt.utterance_id)


# ---------------------------------------------------------------- synthetic corpus

def _voiced(n, sr, rng):
    t = np.arange(n) / sr
    f0 = rng.uniform(90.0, 250.0)
    glide = 1.0 + rng.uniform(-0.1, 0.1) * t / max(t[-1], 1e-9)
    phase = 2 * np.pi * np.cumsum(f0 * glide) / sr
    n_harm = int(min(4000.0 / f0, 30))
    x = np.zeros(n)
    for k in range(1, n_harm + 1):
        x += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    rate = rng.uniform(3.0, 8.0)
    x *= 0.6 + 0.4 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    ramp = min(int(0.01 * sr), n // 2)
    if ramp:
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        x[:ramp] *= w
        x[n - ramp:] *= w[::-1]
    return x / np.max(np.abs(x))


def synth_utterance(utterance_id, duration, sr, rng, seg_range=(0.2, 0.8), level=0.5):
    """Alternate voiced and silent stretches until ``duration`` is reached.

    The leading and trailing silences are half-length draws, so voiced and
    silent time have the same expectation.
    """
    lo, hi = seg_range
    lengths = [0.5 * rng.uniform(lo, hi)]
    while sum(lengths) - 0.5 * lengths[-1] < duration:
        lengths += [rng.uniform(lo, hi), rng.uniform(lo, hi)]
    lengths[-1] *= 0.5
    edges = np.round(np.cumsum([0.0] + lengths) * sr).astype(int)
    x = np.zeros(edges[-1])
    segs = []
    for a, b in zip(edges[1::2], edges[2::2]):
        x[a:b] = _voiced(b - a, sr, rng) * level * rng.uniform(0.5, 1.0)
        segs.append((a / sr, b / sr))
    return Utterance(Signal(x, sr), LabelTrack(segs), utterance_id)


def synth_corpus(n_utterances, duration_range=(2.0, 4.0), seed=0, sample_rate=16000,
                 seg_range=(0.2, 0.8)):
    """Harmonic-stack pseudo speech alternating with digital silence.

    Voiced and silent stretches both last ``U(seg_range)`` seconds, so about
    half of each utterance is speech. Durations overshoot the drawn target by
    at most one voiced/silent pair. Utterance ``i`` uses its own stream
    seeded by ``(seed, i)``.
    """
    if int(n_utterances) < 1:
        raise ValueError("n_utterances must be >= 1")
    lo, hi = duration_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad duration_range {duration_range}")
    out = []
    for i in range(int(n_utterances)):
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, i])
        dur = rng.uniform(lo, hi)
        out.append(synth_utterance(f"utt{i:05d}", dur, sample_rate, rng, seg_range))
    return out


# ---------------------------------------------------------------- manifests

@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    source_path: str
    scenario_id: str
    rir_model: str
    snr_db: Optional[float]
    noise_kind: Optional[str]
    seed: int
    output_path: str
    label_path: str = ""
    gain: float = 1.0
    label_shift: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


_PATH_FIELDS = ("source_path", "output_path", "label_path")


def _rel(p, base):
    if not p:
        return p
    try:
        return Path(p).resolve().relative_to(base).as_posix()
    except ValueError:
        return str(p)


def write_manifest(entries, path):
    """Write entries sorted by ``(utterance_id, scenario_id)``.

    Paths under the manifest's directory are stored relative to it, so a
    generated tree can be moved or compared across output roots.
    """
    base = Path(path).resolve().parent
    entries = sorted(entries, key=lambda e: (e.utterance_id, e.scenario_id))
    with open(path, "w") as fh:
        for e in entries:
            d = e.to_dict()
            for k in _PATH_FIELDS:
                d[k] = _rel(d[k], base)
            fh.write(json.dumps(d, sort_keys=True) + "\n")
    return entries


def read_manifest(path):
    """Entries with paths resolved against the manifest's directory."""
    base = Path(path).parent
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                for k in _PATH_FIELDS:
                    if d[k] and not Path(d[k]).is_absolute():
                        d[k] = str(base / d[k])
                out.append(ManifestEntry.from_dict(d))
    return out


def entry_seed(seed, utterance_id, scenario_id):
    h = hashlib.blake2b(f"{utterance_id}|{scenario_id}".encode(), digest_size=8).digest()
    return (int(seed) ^ int.from_bytes(h, "little")) & 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class MixRanges:
    """Per-entry noise draw: SNR ~ U(snr_range), kind uniform over ``noise_kinds``."""

    snr_range: tuple = (10.0, 20.0)
    noise_kinds: tuple = ("white", "colored")
    slope_range: tuple = (-6.0, -1.0)
    noise_paths: tuple = ()

    def __post_init__(self):
        lo, hi = self.snr_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ValueError(f"bad snr_range {self.snr_range}")
        if not self.noise_kinds:
            raise ValueError("noise_kinds is empty")
        if "file" in self.noise_kinds and not self.noise_paths:
            raise ValueError("file noise requested without noise_paths")

    def draw(self, seed):
        rng = np.random.default_rng(seed)
        snr = float(rng.uniform(*self.snr_range))
        kind = self.noise_kinds[int(rng.integers(len(self.noise_kinds)))]
        slope = float(rng.uniform(*self.slope_range))
        path = None
        if kind == "file":
            path = self.noise_paths[int(rng.integers(len(self.noise_paths)))]
        return MixSpec(snr, kind, slope, path, int(rng.integers(2 ** 63)))


def level_match(y, reference):
    """Scale ``y`` to the energy of ``reference``, then back off to avoid clipping.

    Energy rather than RMS, so the zero tail of a pure delay leaves the gain at 1.
    """
    ey = float(y @ y)
    g = np.sqrt(float(reference @ reference) / ey) if ey > 0 else 1.0
    peak = np.max(np.abs(y)) * g
    if peak > PEAK_LIMIT:
        g *= PEAK_LIMIT / peak
    return float(g)


def _peak_guard(y):
    peak = np.max(np.abs(y))
    return float(PEAK_LIMIT / peak) if peak > PEAK_LIMIT else 1.0


def augment_one(utt, rir, mix, seed):
    """Noise-mix ``utt`` (when ``mix`` is given), then convolve with ``rir``.

    Returns ``(samples, labels, gain, mix_spec)``. Labels move by the RIR's
    direct-path delay and keep anechoic timing otherwise.
    """
    sr = utt.signal.sample_rate
    x = utt.signal
    spec = None
    if mix is not None:
        spec = mix.draw(seed)
        mask = utt.labels.sample_mask(len(x), sr)
        x = mix_at_snr(x, noise_for(spec, len(x), sr), spec, mask)
    if rir is None:
        y, labels = x.samples, utt.labels
        g = _peak_guard(y)
    else:
        y = convolve(x, rir).samples
        dur = y.size / sr
        labels = utt.labels.shifted(rir.peak_index / sr, dur)
        g = level_match(y, x.samples)
    return y * g, labels, g, spec


def _source_path(utt, out_dir):
    if utt.path:
        return utt.path
    return str(Path(out_dir) / "source" / f"{utt.utterance_id}.wav")


def _write_sources(corpus, out_dir):
    (Path(out_dir) / "source").mkdir(parents=True, exist_ok=True)
    for u in corpus:
        if not u.path:
            p = Path(_source_path(u, out_dir))
            write_wav(p, u.signal.samples, u.signal.sample_rate)
            write_labels(u.labels, p.with_suffix(".txt"))


def _task_entry(args):
    utt, rir, scenario_id, model, mix, seed, out_dir = args
    out = Path(out_dir)
    stem = f"{utt.utterance_id}__{scenario_id}"
    wav, lab = out / "audio" / f"{stem}.wav", out / "labels" / f"{stem}.txt"
    try:
        y, labels, g, spec = augment_one(utt, rir, mix, seed)
        write_wav(wav, y, utt.signal.sample_rate)
        write_labels(labels, lab)
    except (OSError, ValueError) as exc:
        return None, f"{stem}: {exc}"
    shift = rir.peak_index / rir.sample_rate if rir is not None else 0.0
    entry = ManifestEntry(utt.utterance_id, _source_path(utt, out_dir), scenario_id, model,
                          spec.snr_db if spec else None, spec.noise_kind if spec else None,
                          seed, str(wav), str(lab), g, shift)
    return entry, None


def _task_rir(args):
    scenario, kind, params, rir_dir = args
    try:
        rir = simulate_rir(scenario, kind, params)
    except Exception as exc:  # reported per scenario, see build_training_set
        return scenario.scenario_id, None, f"{scenario.scenario_id}: {type(exc).__name__}: {exc}"
    write_rir(rir, Path(rir_dir) / f"{scenario.scenario_id}.wav")
    return scenario.scenario_id, rir, None


@dataclass
class BuildResult:
    entries: list
    errors: list
    manifest_path: Optional[str] = None

    def __len__(self):
        return len(self.entries)


def _finish(entries, errors, out_dir):
    out = Path(out_dir)
    path = out / "manifest.jsonl"
    entries = write_manifest([e for e in entries if e is not None], path)
    if errors:
        (out / "errors.log").write_text("".join(e + "\n" for e in errors))
        for e in errors:
            log.warning(e)
    return BuildResult(entries, errors, str(path))


def build_training_set(corpus: Sequence[Utterance], scenarios, kind, mix=None,
                       include_anechoic=True, out_dir="train", *, seed=0, params=None,
                       jobs=1):
    """Noise-mixed anechoic copies plus one reverberant copy per scenario.

    Each entry draws its SNR and noise from a seed derived from
    ``(seed, utterance_id, scenario_id)``, so outputs do not depend on
    ``jobs``. Scenarios whose RIR fails to simulate are skipped and reported.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if not scenarios and not include_anechoic:
        raise ValueError("nothing to build: no scenarios and include_anechoic is False")
    mix = mix or MixRanges()
    out = Path(out_dir)
    for sub in ("audio", "labels", "rirs"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    _write_sources(corpus, out)
    errors = []
    rirs = []
    for sid, rir, err in pmap(_task_rir, [(s, kind, params, out / "rirs") for s in scenarios],
                               jobs):
        if err:
            errors.append(err)
        else:
            rirs.append((sid, rir))
    tasks = []
    for u in corpus:
        if include_anechoic:
            tasks.append((u, None, ANECHOIC, ANECHOIC, mix,
                          entry_seed(seed, u.utterance_id, ANECHOIC), str(out)))
        for sid, rir in rirs:
            tasks.append((u, rir, sid, kind.name, mix, entry_seed(seed, u.utterance_id, sid),
                          str(out)))
    results = pmap(_task_entry, tasks, jobs)
    errors += [e for _, e in results if e]
    return _finish([r for r, _ in results], errors, out)


def build_test_set(corpus: Sequence[Utterance], measured_rirs: Sequence[Rir], out_dir="test",
                   *, jobs=1):
    """Every utterance convolved with every RIR; no noise is added."""
    if not corpus or not measured_rirs:
        raise ValueError("corpus and RIR list must both be non-empty")
    out = Path(out_dir)
    for sub in ("audio", "labels"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    _write_sources(corpus, out)
    errors, tasks = [], []
    for r in measured_rirs:
        bad = [u.utterance_id for u in corpus if u.signal.sample_rate != r.sample_rate]
        if bad:
            errors.append(f"{r.scenario_id}: sample rate {r.sample_rate} Hz does not match "
                          f"{len(bad)} utterance(s)")
            continue
        for u in corpus:
            tasks.append((u, r, r.scenario_id, r.model_name, None, 0, str(out)))
    results = pmap(_task_entry, tasks, jobs)
    errors += [e for _, e in results if e]
    return _finish([r for r, _ in results], errors, out)


def iter_augmented(corpus, rirs, mix=None, include_anechoic=True, *, seed=0):
    """In-memory counterpart of :func:`build_training_set` over precomputed RIRs.

    Yields ``(utterance_id, scenario_id, Signal, LabelTrack)``.
    """
    for u in corpus:
        items = ([(ANECHOIC, None)] if include_anechoic else []) + \
                [(r.scenario_id, r) for r in rirs]
        for sid, r in items:
            y, labels, _, _ = augment_one(u, r, mix, entry_seed(seed, u.utterance_id, sid))
            yield u.utterance_id, sid, Signal(y, u.signal.sample_rate), labels


def load_entry(entry):
    """Audio and labels of one manifest entry as an :class:`Utterance`."""
    x, sr = read_wav(entry.output_path)
    labels = read_labels(entry.label_path) if entry.label_path else LabelTrack()
    return Utterance(Signal(x, sr), labels, f"{entry.utterance_id}__{entry.scenario_id}",
                     entry.output_path)


def expected_entries(n_utterances, n_scenarios, include_anechoic=True):
    return n_utterances * (n_scenarios + int(bool(include_anechoic)))
