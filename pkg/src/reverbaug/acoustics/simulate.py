"""RIR synthesis for the five model kinds."""
import math

import numpy as np
from scipy import signal

from .. import _kernels as K
from ..errors import CapabilityError, ConfigurationError, GeometryError
from ..geometry import MARGIN, SimParams, surface_and_volume
from .analysis import absorption_from_rt60, specular_absorption
from .filterbank import apply_bank, band_edges, complementary_bank
from .models import (AngleFreqReflection, Diffusion, HybridImageRay, ImagePolyhedra,
                     LowFreqBoundary, Rir)
from .polyhedra import polyhedron_images

_SHOEBOX_ONLY = (AngleFreqReflection, LowFreqBoundary, Diffusion)


def resolve_room(scenario, kind=None, c=343.0):
    """The scenario room with absorption filled in from its RT60 target when needed.

    Purely specular models (image sources, specular rays) get the absorption
    that reproduces the target under specular decay; the others use Eyring.
    """
    room = scenario.room
    if room.has_absorption:
        return room, None
    if scenario.rt60_target is None:
        raise ConfigurationError(
            f"scenario {scenario.scenario_id}: room has no absorption and no RT60 target")
    if isinstance(kind, (ImagePolyhedra, HybridImageRay)):
        alpha = specular_absorption(room, scenario.rt60_target, c=c)
    else:
        alpha = absorption_from_rt60(room, scenario.rt60_target)
    return room.with_absorption(alpha), alpha


def _highpass_reflections(full, direct, fs, cutoff):
    """Remove the DC build-up of in-phase image sums, leaving the direct path untouched."""
    if not cutoff:
        return full
    sos = signal.butter(4, cutoff, "highpass", fs=fs, output="sos")
    return direct + signal.sosfiltfilt(sos, full - direct)


def _direct(src, rcv, n, fs, c, taps):
    d = float(np.linalg.norm(np.subtract(src, rcv)))
    return K.accumulate_impulses(np.zeros(n), [d * fs / c], [1.0 / (4 * np.pi * d)], taps)


def _stream(seed, tag):
    return np.random.default_rng([int(seed), tag])


def _pressure_beta(alpha):
    return np.sqrt(np.clip(1.0 - alpha, 0.0, 1.0))


def image_response(room, src, rcv, n, fs, c, max_order, taps, poly_cap=5):
    """Broadband image-source response; ``max_order=None`` means unlimited (shoebox only)."""
    beta = _pressure_beta(room.absorption_matrix(1))
    max_dist = c * n / fs + taps * c / fs
    if room.kind == "shoebox":
        order = -1 if max_order is None else int(max_order)
        return K.shoebox_images(n, room.dims, src, rcv, beta, max_order=order,
                                max_dist=max_dist, fs=fs, c=c, taps=taps)[0]
    order = poly_cap if max_order is None else int(max_order)
    pos, _, gain = polyhedron_images(room, src, rcv, order, beta[:, 0])
    d = np.linalg.norm(pos - np.asarray(rcv)[None, :], axis=1)
    keep = d <= max_dist
    out = np.zeros(n)
    return K.accumulate_impulses(out, d[keep] * fs / c, gain[keep] / (4 * np.pi * d[keep]), taps)


def _admittance(alpha):
    """Normalised real admittance of a locally reacting wall with normal-incidence absorption."""
    r0 = _pressure_beta(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = (1.0 - r0) / (1.0 + r0)
    # fully absorbing walls reflect nothing at any angle
    return np.where(alpha >= 1.0 - 1e-12, -1.0, xi)


def _check_bands(centers, fs):
    edges = band_edges(centers)
    if len(centers) and (centers[-1] >= fs / 2 or np.any(edges >= fs / 2)):
        raise ConfigurationError(f"band centres {centers} reach the Nyquist frequency {fs / 2} Hz")
    return edges


def angle_freq_response(room, src, rcv, n, fs, c, kind):
    edges = _check_bands(kind.band_centers, fs)
    alpha = room.absorption_matrix(len(kind.band_centers))
    xi = _admittance(alpha)
    order = -1 if kind.max_order is None else int(kind.max_order)
    max_dist = c * n / fs + kind.frac_taps * c / fs
    bands = K.shoebox_images(n, room.dims, src, rcv, _pressure_beta(alpha), xi=xi,
                             max_order=order, max_dist=max_dist, fs=fs, c=c,
                             taps=kind.frac_taps)
    if bands.shape[0] == 1:
        h = bands[0]
    else:
        h = apply_bank(bands, complementary_bank(edges, fs, kind.filter_taps))
    return _highpass_reflections(h, _direct(src, rcv, n, fs, c, kind.frac_taps), fs, kind.highpass)


def modal_response(room, src, rcv, n, fs, c, f_max, alpha_low):
    """Damped rectangular-room modes below ``f_max`` with impedance-derived damping.

    Green's function ``sum_m c^2 psi_m(s) psi_m(r) / (Lambda_m omega_m) e^{-delta_m t}
    sin(omega_m t)``, sampled with the same ``1/fs`` weighting as the image
    impulses. Modal damping follows from first-order perturbation of a wall
    admittance ``xi``: ``delta_m = c/2 sum_walls xi_w eps_a / L_a``.
    """
    L = np.asarray(room.dims)
    V = float(np.prod(L))
    nmax = np.floor(2.0 * f_max * L / c).astype(int)
    grids = np.meshgrid(*[np.arange(m + 1) for m in nmax], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)[1:]
    k = np.pi * idx / L[None, :]
    omega = c * np.linalg.norm(k, axis=1)
    keep = omega <= 2 * np.pi * f_max
    idx, k, omega = idx[keep], k[keep], omega[keep]
    eps = np.where(idx == 0, 1.0, 2.0)
    lam = V / np.prod(eps, axis=1)
    psi_s = np.prod(np.cos(k * np.asarray(src)[None, :]), axis=1)
    psi_r = np.prod(np.cos(k * np.asarray(rcv)[None, :]), axis=1)
    xi = np.clip(_admittance(alpha_low), 0.0, None)
    delta = np.zeros(omega.size)
    for a in range(3):
        delta += 0.5 * c * (xi[2 * a] + xi[2 * a + 1]) * eps[:, a] / L[a]
    weights = c * c * psi_s * psi_r / (lam * omega) / fs
    return K.modal_sum(n, omega, delta, weights, fs)


def low_freq_response(room, src, rcv, n, fs, c, kind):
    if kind.crossover >= fs / 2:
        raise ConfigurationError("crossover must be below Nyquist")
    high = angle_freq_response(room, src, rcv, n, fs, c, kind.angle_model)
    alpha = room.absorption_matrix(len(kind.band_centers))
    alpha_low = alpha[:, 0]
    xover = complementary_bank([kind.crossover], fs, kind.filter_taps)
    if np.all(alpha_low >= 1.0 - 1e-12):
        # anechoic walls support no modes; the image field is already complete
        return apply_bank(np.stack([high, high]), xover)
    f_max = kind.modal_max_freq or 1.5 * kind.crossover
    low = modal_response(room, src, rcv, n, fs, c, f_max, alpha_low)
    return apply_bank(np.stack([low, high]), xover)


def _onset_ramp(n, fs, t0, t1):
    """0 before ``t0``, raised-cosine rise to 1 at ``t1``."""
    t = np.arange(n) / fs
    if t1 <= t0:
        return (t >= t0).astype(np.float64)
    x = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


def _noise_tail(energy_per_sample, seed, tag):
    noise = _stream(seed, tag).standard_normal(energy_per_sample.size)
    return np.sqrt(np.maximum(energy_per_sample, 0.0)) * noise


def receiver_radius(volume, n_rays, c, bin_width, hits_per_bin=10.0):
    r = math.sqrt(hits_per_bin * volume / (n_rays * c * math.pi * bin_width))
    return min(max(r, 0.25), 1.0)


def hybrid_response(room, src, rcv, n, fs, c, kind, seed):
    early = image_response(room, src, rcv, n, fs, c, kind.early_order, kind.frac_taps,
                           kind.polyhedron_max_order)
    S, V = surface_and_volume(room)
    radius = kind.receiver_radius or receiver_radius(V, kind.n_rays, c, kind.bin_width)
    dirs = _stream(seed, 1).standard_normal((kind.n_rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    alpha = room.absorption_matrix(1)[:, 0]
    t_max = n / fs
    hist = K.trace_rays(room.normals, room.offsets, alpha, src, rcv, radius, dirs,
                        t_max=t_max, c=c, bin_width=kind.bin_width,
                        min_order=kind.early_order)
    # chord-weighted energy -> sum of h^2 per bin, matching the 1/(4 pi d) impulse scale
    vs = 4.0 / 3.0 * math.pi * radius ** 3
    h2_bin = np.convolve(hist, np.ones(3) / 3.0, mode="same") / (4.0 * math.pi * vs)
    centres = (np.arange(hist.size) + 0.5) * kind.bin_width
    per_sample = np.interp(np.arange(n) / fs, centres, h2_bin) / (kind.bin_width * fs)
    t_dir = np.linalg.norm(np.subtract(src, rcv)) / c
    tail = _noise_tail(per_sample, seed, 2) * _onset_ramp(n, fs, t_dir, t_dir + 5e-3)
    return early + tail, {"receiver_radius": radius}


def _cell_weights(point, spacing, shape):
    """Trilinear weights of cell centres around ``point``."""
    f = np.asarray(point) / spacing - 0.5
    i0 = np.clip(np.floor(f).astype(int), 0, np.maximum(np.asarray(shape) - 2, 0))
    t = np.clip(f - i0, 0.0, 1.0)
    idx, wts = [], []
    for corner in range(8):
        off = np.array([(corner >> a) & 1 for a in range(3)])
        cell = np.minimum(i0 + off, np.asarray(shape) - 1)
        w = np.prod(np.where(off == 1, t, 1.0 - t))
        idx.append(cell)
        wts.append(w)
    return np.array(idx), np.array(wts)


def diffusion_setup(room, kind, c):
    """Grid, diffusion coefficient, wall exchange and stable step for a shoebox."""
    S, V = surface_and_volume(room)
    L = np.asarray(room.dims)
    shape = tuple(int(v) for v in np.maximum(1, np.round(L / kind.grid_spacing)))
    spacing = L / np.asarray(shape)
    mfp = 4.0 * V / S
    diff = mfp * c / 3.0
    alpha = room.absorption_matrix(1)[:, 0]
    da = np.repeat(spacing, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind.exchange == "eyring":
            h = -c * np.log1p(-alpha) / 4.0
        else:
            h = c * alpha / 4.0
        # half-cell boundary resistance in series with the wall; alpha = 1 is the limit h -> inf
        h_eff = np.where(np.isinf(h), 2.0 * diff / da, h / (1.0 + h * da / (2.0 * diff)))
    dt_max = K.diffusion.stable_dt(diff, spacing, h_eff, shape)
    return shape, spacing, diff, h_eff, dt_max, alpha


def diffusion_response(room, src, rcv, n, fs, c, kind, seed):
    early = image_response(room, src, rcv, n, fs, c, kind.early_order, kind.frac_taps)
    shape, spacing, diff, h_eff, dt_max, alpha = diffusion_setup(room, kind, c)
    dt = kind.dt if kind.dt is not None else 0.9 * dt_max
    if dt > dt_max:
        raise ConfigurationError(
            f"diffusion time step {dt:.3e} s exceeds the explicit stability bound {dt_max:.3e} s")
    t_max = n / fs
    n_steps = int(math.ceil(t_max / dt))
    cell_vol = float(np.prod(spacing))
    # the reverberant field is fed by what survives the first wall hit
    mean_alpha = float(np.sum(alpha * room.areas) / np.sum(room.areas))
    w0 = np.zeros(shape)
    sidx, swts = _cell_weights(src, spacing, shape)
    for cell, wt in zip(sidx, swts):
        w0[tuple(cell)] += wt * (1.0 - mean_alpha) / cell_vol
    ridx, rwts = _cell_weights(rcv, spacing, shape)
    env = K.run_diffusion(w0, diff, spacing, h_eff, dt, n_steps, ridx, rwts)
    w_t = np.interp(np.arange(n) / fs, np.arange(n_steps + 1) * dt, env)
    per_sample = w_t * c / (4.0 * math.pi) / fs

    t_dir = np.linalg.norm(np.subtract(src, rcv)) / c
    # ramp the tail in over the first-order arrivals
    img = np.asarray(room.dims)
    firsts = []
    for a in range(3):
        for wall in (0.0, img[a]):
            p = np.array(src, dtype=np.float64)
            p[a] = 2 * wall - p[a]
            firsts.append(np.linalg.norm(p - np.asarray(rcv)) / c)
    tail = _noise_tail(per_sample, seed, 3) * _onset_ramp(n, fs, t_dir, max(firsts))
    meta = {"grid_shape": list(shape), "dt": dt, "diffusion_coefficient": diff}
    return early + tail, meta


def simulate_rir(scenario, kind, params=None):
    """Synthesize the RIR of ``scenario`` with model ``kind``."""
    params = params or SimParams()
    if isinstance(kind, _SHOEBOX_ONLY) and scenario.room.kind != "shoebox":
        raise CapabilityError(f"model {kind.name!r} supports shoebox rooms only")
    room, alpha = resolve_room(scenario, kind, params.c)
    src = np.asarray(scenario.source_pos)
    rcv = np.asarray(scenario.receiver_pos)
    for label, p in (("source", src), ("receiver", rcv)):
        if not room.contains(p, MARGIN):
            raise GeometryError(f"scenario {scenario.scenario_id}: {label} is not inside the room")
    fs, c = params.sample_rate, params.c
    n = params.n_samples(scenario)
    meta = {}
    if isinstance(kind, ImagePolyhedra):
        h = image_response(room, src, rcv, n, fs, c, kind.max_order, kind.frac_taps,
                           kind.polyhedron_max_order)
        h = _highpass_reflections(h, _direct(src, rcv, n, fs, c, kind.frac_taps), fs,
                                  kind.highpass)
    elif isinstance(kind, HybridImageRay):
        h, meta = hybrid_response(room, src, rcv, n, fs, c, kind, scenario.seed)
    elif isinstance(kind, AngleFreqReflection):
        h = angle_freq_response(room, src, rcv, n, fs, c, kind)
    elif isinstance(kind, LowFreqBoundary):
        h = low_freq_response(room, src, rcv, n, fs, c, kind)
    elif isinstance(kind, Diffusion):
        h, meta = diffusion_response(room, src, rcv, n, fs, c, kind, scenario.seed)
    else:
        raise TypeError(f"unknown model kind {kind!r}")
    peak = int(round(scenario.distance / c * fs))
    meta.update({"rt60_target": scenario.rt60_target,
                 "absorption": alpha if alpha is not None else room.absorption_matrix(1)[:, 0].tolist()})
    return Rir(h, fs, kind, scenario.scenario_id, min(peak, n - 1), meta)
