"""RIR model kinds, the ``Rir`` container and its analysis record."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import ClassVar, Optional

import numpy as np

OCTAVE_CENTERS = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0)


def _positive(obj, *names):
    for name in names:
        v = getattr(obj, name)
        if v is not None and not v > 0:
            raise ValueError(f"{type(obj).__name__}.{name} must be positive, got {v}")


def _order(obj, name):
    v = getattr(obj, name)
    if v is not None and (int(v) != v or v < 0):
        raise ValueError(f"{type(obj).__name__}.{name} must be a non-negative integer, got {v}")


def _bands(centers):
    c = tuple(float(v) for v in centers)
    if len(c) < 1 or any(b <= a for a, b in zip(c, c[1:])) or c[0] <= 0:
        raise ValueError(f"band centres must be positive and strictly increasing, got {c}")
    return c


@dataclass(frozen=True)
class ImagePolyhedra:
    """Image sources against planar faces (lattice for shoeboxes, Borish recursion otherwise).

    ``max_order=None`` keeps every image inside the RIR length for shoeboxes
    and falls back to ``polyhedron_max_order`` for general polyhedra.
    """

    name: ClassVar[str] = "image"
    max_order: Optional[int] = None
    polyhedron_max_order: int = 5
    frac_taps: int = 32
    highpass: float = 50.0

    def __post_init__(self):
        _order(self, "max_order")
        if self.highpass < 0:
            raise ValueError("highpass must be >= 0 (0 disables it)")
        _order(self, "polyhedron_max_order")
        if self.frac_taps < 0:
            raise ValueError("frac_taps must be >= 0")


@dataclass(frozen=True)
class HybridImageRay:
    name: ClassVar[str] = "hybrid"
    early_order: int = 2
    n_rays: int = 10_000
    bin_width: float = 1e-3
    receiver_radius: Optional[float] = None
    polyhedron_max_order: int = 5
    frac_taps: int = 32

    def __post_init__(self):
        _order(self, "early_order")
        _positive(self, "n_rays", "bin_width", "receiver_radius")


@dataclass(frozen=True)
class AngleFreqReflection:
    """Image lattice with per-band, angle-dependent reflection of a locally reacting wall."""

    name: ClassVar[str] = "angle"
    max_order: Optional[int] = None
    band_centers: tuple = OCTAVE_CENTERS
    filter_taps: int = 1023
    frac_taps: int = 32
    highpass: float = 50.0

    def __post_init__(self):
        _order(self, "max_order")
        object.__setattr__(self, "band_centers", _bands(self.band_centers))
        _positive(self, "filter_taps")
        if self.highpass < 0:
            raise ValueError("highpass must be >= 0 (0 disables it)")
        if self.filter_taps % 2 == 0:
            raise ValueError("filter_taps must be odd for a linear-phase bank")


@dataclass(frozen=True)
class LowFreqBoundary:
    """Angle/frequency image model above ``crossover``; damped room modes below it."""

    name: ClassVar[str] = "lowfreq"
    crossover: float = 250.0
    modal_max_freq: Optional[float] = None
    max_order: Optional[int] = None
    band_centers: tuple = OCTAVE_CENTERS
    filter_taps: int = 1023
    frac_taps: int = 32

    def __post_init__(self):
        _order(self, "max_order")
        _positive(self, "crossover", "modal_max_freq", "filter_taps")
        object.__setattr__(self, "band_centers", _bands(self.band_centers))
        if self.filter_taps % 2 == 0:
            raise ValueError("filter_taps must be odd for a linear-phase bank")

    @property
    def angle_model(self):
        return AngleFreqReflection(self.max_order, self.band_centers, self.filter_taps,
                                   self.frac_taps, highpass=0.0)


@dataclass(frozen=True)
class Diffusion:
    """Early image sources plus a diffusion-equation energy tail.

    ``exchange`` selects the wall exchange coefficient: ``"eyring"`` uses
    ``-c ln(1 - a) / 4`` (consistent with Eyring decay), ``"sabine"`` the
    classical ``c a / 4``.
    """

    name: ClassVar[str] = "diffusion"
    grid_spacing: float = 0.5
    dt: Optional[float] = None
    early_order: int = 1
    exchange: str = "eyring"
    frac_taps: int = 32

    def __post_init__(self):
        _positive(self, "grid_spacing", "dt")
        _order(self, "early_order")
        if self.exchange not in ("eyring", "sabine"):
            raise ValueError(f"exchange must be 'eyring' or 'sabine', got {self.exchange!r}")


MODEL_KINDS = {k.name: k for k in (ImagePolyhedra, HybridImageRay, AngleFreqReflection,
                                   LowFreqBoundary, Diffusion)}


def kind_from_name(name, **params):
    try:
        cls = MODEL_KINDS[name]
    except KeyError:
        raise ValueError(f"unknown RIR model {name!r}; choose from {sorted(MODEL_KINDS)}") from None
    return cls(**params)


def kind_to_dict(kind):
    if kind is None:
        return {"name": "measured"}
    d = {"name": kind.name}
    for k, v in asdict(kind).items():
        d[k] = list(v) if isinstance(v, tuple) else v
    return d


def kind_from_dict(d):
    d = dict(d)
    name = d.pop("name")
    if name == "measured":
        return None
    return kind_from_name(name, **{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True, eq=False)
class Rir:
    samples: np.ndarray
    sample_rate: int
    model: object
    scenario_id: str
    peak_index: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", h)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("RIR must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(h)):
            raise ValueError("RIR contains non-finite samples")
        if not np.sum(h * h) > 0:
            raise ValueError("RIR has zero energy")
        if not 0 <= self.peak_index < h.size:
            raise ValueError(f"peak_index {self.peak_index} outside [0, {h.size})")

    def __len__(self):
        return self.samples.size

    @property
    def model_name(self):
        return "measured" if self.model is None else self.model.name

    @classmethod
    def measured(cls, samples, sample_rate, scenario_id="measured"):
        h = np.asarray(samples, dtype=np.float64)
        return cls(h, int(sample_rate), None, scenario_id, int(np.argmax(np.abs(h))))


@dataclass(frozen=True, eq=False)
class RirAnalysis:
    rt60_est: float
    edc: np.ndarray
    direct_to_reverberant_ratio: float
    fit_slope: float = float("nan")
    fit_intercept: float = float("nan")
