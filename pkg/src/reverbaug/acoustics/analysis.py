"""Schroeder energy decay, T30-style RT60 estimation and absorption mapping."""
from functools import lru_cache

import numpy as np

from ..errors import InfeasibleAbsorptionError, InsufficientDecayError
from ..geometry import SABINE, surface_and_volume
from .models import RirAnalysis

_EDC_FLOOR_DB = -300.0


def sabine_absorption(room, rt60_target):
    S, V = surface_and_volume(room)
    return SABINE * V / (S * rt60_target)


def absorption_from_rt60(room, rt60_target):
    """Uniform absorption coefficient whose Eyring RT60 equals ``rt60_target``.

    A target at or below the Sabine minimum ``0.161 V / S`` (where the Sabine
    mean absorption reaches 1) is rejected as infeasible.
    """
    if not rt60_target > 0:
        raise ValueError(f"rt60_target must be positive, got {rt60_target}")
    sab = sabine_absorption(room, rt60_target)
    if sab >= 1.0:
        S, V = surface_and_volume(room)
        t_min = SABINE * V / S
        raise InfeasibleAbsorptionError(
            f"RT60 {rt60_target:g} s is not achievable in this room "
            f"(V={V:.2f} m^3, S={S:.2f} m^2); minimum achievable RT60 is {t_min:.3f} s",
            min_rt60=t_min)
    return float(-np.expm1(-sab))


def _sphere_points(n=4096):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5.0 ** 0.5) * i
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@lru_cache(maxsize=256)
def _specular_t30(dims, fit_range):
    """T30-style decay time of the direction-averaged specular decay at unit ``k``."""
    g = np.abs(_sphere_points(2048)) @ (1.0 / np.asarray(dims))
    # -35 dB is reached well before the slowest direction has decayed by e^-10
    t = np.linspace(0.0, 10.0 / g.min(), 800)
    edc = np.mean(np.exp(-np.outer(t, g)) / g[None, :], axis=1)
    edc_db = 10.0 * np.log10(edc / edc[0])
    hi, lo = max(fit_range), min(fit_range)
    sel = (edc_db <= hi) & (edc_db >= lo)
    slope = np.polyfit(t[sel], edc_db[sel], 1)[0]
    return 60.0 / abs(slope)


def specular_absorption(room, rt60_target, c=343.0, fit_range=(-5.0, -35.0)):
    """Uniform absorption giving ``rt60_target`` in a specularly reflecting shoebox.

    A ray travelling along ``u`` hits walls at the rate ``c * sum_a |u_a| / L_a``,
    so with ``k = -c ln(1 - a)`` the energy decay is the direction average of
    ``exp(-k t sum_a |u_a| / L_a)``. Its backward integral has the closed form
    ``<exp(-k g t) / (k g)>``; the T30 of that curve scales as ``1 / k``, which
    fixes ``k`` directly. Eyring is only the isotropic special case, and
    overestimates the decay rate of elongated or flat rooms.
    """
    if room.kind != "shoebox":
        return absorption_from_rt60(room, rt60_target)
    absorption_from_rt60(room, rt60_target)  # same feasibility gate
    k = _specular_t30(tuple(float(v) for v in room.dims), tuple(fit_range)) / rt60_target
    return float(-np.expm1(-k / c))


def energy_decay_curve(h):
    """Backward-integrated energy in dB, normalised to 0 dB at t = 0."""
    e = np.asarray(h, dtype=np.float64) ** 2
    tail = np.cumsum(e[::-1])[::-1]
    with np.errstate(divide="ignore"):
        edc = 10.0 * np.log10(tail / tail[0])
    return np.maximum(edc, _EDC_FLOOR_DB)


def analyze_rir(rir, fit_range=(-5.0, -35.0), direct_window=2.5e-3):
    """RT60 from a least-squares line through the EDC between the ``fit_range`` levels."""
    hi, lo = max(fit_range), min(fit_range)
    h = rir.samples
    fs = rir.sample_rate
    edc = energy_decay_curve(h)
    inside = (edc <= hi) & (edc >= lo)
    if edc[-1] > lo or np.count_nonzero(inside) < 2:
        raise InsufficientDecayError(
            f"energy decay curve does not span {hi:g} to {lo:g} dB (reaches {edc[-1]:.1f} dB)")
    start = int(np.argmax(edc <= hi))
    stop = int(np.argmax(edc < lo))
    idx = np.arange(start, stop)
    if idx.size < 2:
        raise InsufficientDecayError("decay range spans fewer than two samples")
    slope, intercept = np.polyfit(idx / fs, edc[idx], 1)
    if not slope < 0:
        raise InsufficientDecayError("energy decay curve does not decay over the fit range")

    w = int(round(direct_window * fs))
    a, b = max(rir.peak_index - w, 0), min(rir.peak_index + w + 1, h.size)
    e = h * h
    direct = float(np.sum(e[a:b]))
    rest = float(np.sum(e)) - direct
    drr = 10.0 * np.log10(direct / rest) if rest > 0 else float("inf")
    return RirAnalysis(60.0 / abs(slope), edc, drr, float(slope), float(intercept))
