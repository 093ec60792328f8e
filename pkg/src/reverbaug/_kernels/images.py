"""Image-source lattice for rectangular rooms.

Walls are ordered ``x=0, x=Lx, y=0, y=Ly, z=0, z=Lz``. Along each axis the
image of coordinate ``s`` for lattice index ``n`` and parity ``p`` sits at
``(1 - 2p) s + 2 n L`` and has ``|n - p|`` reflections off the low wall and
``|n|`` off the high wall.

Reflection factors are either fixed per wall and band (``beta``) or computed
from the incidence angle of a locally reacting surface with normalised
admittance ``xi``: ``R = (cos - xi) / (cos + xi)``. A negative admittance
marks an anechoic wall (``R = 0`` at every angle).
"""
import math

import numpy as np

from .._backend import njit, pick
from .fracdelay import _write_impulse, accumulate_impulses_numpy


def _axis_entries(L, s, r, max_dist):
    nmax = int(max_dist / (2.0 * L)) + 2
    n = np.repeat(np.arange(-nmax, nmax + 1), 2)
    p = np.tile(np.array([0, 1]), 2 * nmax + 1)
    pos = (1 - 2 * p) * s + 2.0 * n * L
    lo = np.abs(n - p)
    hi = np.abs(n)
    keep = np.abs(pos - r) <= max_dist
    return pos[keep] - r, lo[keep], hi[keep]


@njit
def _reflection(xi, cos_t):
    if xi < 0.0:
        return 0.0
    den = cos_t + xi
    if den == 0.0:
        return 1.0
    return (cos_t - xi) / den


@njit
def shoebox_images_numba(out, dims, src, rcv, beta, xi, use_angle, max_order,
                         max_dist, spm, taps):
    n_bands = out.shape[0]
    amps = np.empty(n_bands)
    counts = np.zeros(6, dtype=np.int64)
    nmax = np.empty(3, dtype=np.int64)
    for a in range(3):
        nmax[a] = int(max_dist / (2.0 * dims[a])) + 2
    for nx in range(-nmax[0], nmax[0] + 1):
        for px in range(2):
            dx = (1 - 2 * px) * src[0] + 2.0 * nx * dims[0] - rcv[0]
            if abs(dx) > max_dist:
                continue
            counts[0] = abs(nx - px)
            counts[1] = abs(nx)
            for ny in range(-nmax[1], nmax[1] + 1):
                for py in range(2):
                    dy = (1 - 2 * py) * src[1] + 2.0 * ny * dims[1] - rcv[1]
                    dxy2 = dx * dx + dy * dy
                    if dxy2 > max_dist * max_dist:
                        continue
                    counts[2] = abs(ny - py)
                    counts[3] = abs(ny)
                    for nz in range(-nmax[2], nmax[2] + 1):
                        for pz in range(2):
                            dz = (1 - 2 * pz) * src[2] + 2.0 * nz * dims[2] - rcv[2]
                            d2 = dxy2 + dz * dz
                            if d2 > max_dist * max_dist:
                                continue
                            counts[4] = abs(nz - pz)
                            counts[5] = abs(nz)
                            if max_order >= 0:
                                order = 0
                                for w in range(6):
                                    order += counts[w]
                                if order > max_order:
                                    continue
                            d = math.sqrt(d2)
                            g = 1.0 / (4.0 * math.pi * d)
                            for b in range(n_bands):
                                amp = g
                                for w in range(6):
                                    c = counts[w]
                                    if c == 0:
                                        continue
                                    if use_angle:
                                        if w < 2:
                                            ct = abs(dx) / d
                                        elif w < 4:
                                            ct = abs(dy) / d
                                        else:
                                            ct = abs(dz) / d
                                        amp *= _reflection(xi[w, b], ct) ** c
                                    else:
                                        amp *= beta[w, b] ** c
                                amps[b] = amp
                            delay = d * spm
                            for b in range(n_bands):
                                if amps[b] != 0.0:
                                    _write_impulse(out[b], delay, amps[b], taps)
    return out


def _reflection_numpy(xi, cos_t):
    if xi < 0.0:
        return np.zeros_like(cos_t)
    den = cos_t + xi
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den == 0.0, 1.0, (cos_t - xi) / np.where(den == 0.0, 1.0, den))
    return r


def shoebox_images_numpy(out, dims, src, rcv, beta, xi, use_angle, max_order,
                         max_dist, spm, taps):
    n_bands = out.shape[0]
    ex = [_axis_entries(dims[a], src[a], rcv[a], max_dist) for a in range(3)]
    (dy, ly, hy), (dz, lz, hz) = ex[1], ex[2]
    dyz2 = dy[:, None] ** 2 + dz[None, :] ** 2
    for dx, lx, hx in zip(*ex[0]):
        d2 = dx * dx + dyz2
        iy, iz = np.nonzero(d2 <= max_dist * max_dist)
        if iy.size == 0:
            continue
        cnt = np.stack([np.full(iy.size, lx), np.full(iy.size, hx),
                        ly[iy], hy[iy], lz[iz], hz[iz]])
        if max_order >= 0:
            ok = cnt.sum(axis=0) <= max_order
            iy, iz, cnt = iy[ok], iz[ok], cnt[:, ok]
            if iy.size == 0:
                continue
        d = np.sqrt(d2[iy, iz])
        g = 1.0 / (4.0 * np.pi * d)
        comps = (np.full(d.size, abs(dx)), np.abs(dy[iy]), np.abs(dz[iz]))
        delay = d * spm
        for b in range(n_bands):
            amp = g.copy()
            for w in range(6):
                c = cnt[w]
                if not np.any(c):
                    continue
                if use_angle:
                    refl = _reflection_numpy(xi[w, b], comps[w // 2] / d)
                else:
                    refl = beta[w, b]
                amp *= np.where(c == 0, 1.0, refl ** c)
            accumulate_impulses_numpy(out[b], delay, amp, taps)
    return out


_impl = pick(shoebox_images_numba, shoebox_images_numpy)


def shoebox_images(n_samples, dims, src, rcv, beta, *, xi=None, max_order=-1,
                   max_dist, fs, c, taps=32):
    """Render the image-source response of a shoebox into ``(bands, n_samples)``.

    ``beta`` has shape ``(6, bands)``. Pass ``xi`` (same shape) to switch to
    angle-dependent reflection; ``beta`` is then ignored.
    """
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    use_angle = xi is not None
    xi = np.ascontiguousarray(beta if xi is None else xi, dtype=np.float64)
    out = np.zeros((beta.shape[1], int(n_samples)))
    return _impl(out, np.asarray(dims, dtype=np.float64), np.asarray(src, dtype=np.float64),
                 np.asarray(rcv, dtype=np.float64), beta, xi, use_angle,
                 int(max_order), float(max_dist), float(fs) / float(c), int(taps))
