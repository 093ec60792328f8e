"""Specular ray tracing inside a convex room bounded by planes ``n . x = d``.

Each ray carries energy ``1 / n_rays`` and loses the face's energy absorption
at every bounce. Passing through the spherical receiver deposits
``energy * chord_length`` into the time bin of closest approach, but only for
rays that have already been reflected more than ``min_order`` times.
"""
import math

import numpy as np

from .._backend import njit, pick


@njit
def trace_rays_numba(normals, offsets, absorb, src, rcv, radius, dirs,
                     t_max, c, bin_width, min_order):
    n_bins = int(math.ceil(t_max / bin_width))
    hist = np.zeros(n_bins)
    n_rays = dirs.shape[0]
    n_faces = normals.shape[0]
    max_len = c * t_max
    r2 = radius * radius
    e0 = 1.0 / n_rays
    for i in range(n_rays):
        px, py, pz = src[0], src[1], src[2]
        ux, uy, uz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        e = e0
        travelled = 0.0
        order = 0
        while travelled < max_len and e > 0.0:
            best = 1e300
            face = -1
            for f in range(n_faces):
                un = normals[f, 0] * ux + normals[f, 1] * uy + normals[f, 2] * uz
                if un > 1e-12:
                    t = (offsets[f] - (normals[f, 0] * px + normals[f, 1] * py
                                       + normals[f, 2] * pz)) / un
                    if t < best:
                        best = t
                        face = f
            if face < 0:
                break
            if best < 0.0:
                best = 0.0
            if order > min_order:
                wx, wy, wz = rcv[0] - px, rcv[1] - py, rcv[2] - pz
                tc = wx * ux + wy * uy + wz * uz
                q = wx * wx + wy * wy + wz * wz - tc * tc
                if q < r2:
                    hc = math.sqrt(r2 - q)
                    a = max(tc - hc, 0.0)
                    b = min(tc + hc, best)
                    if b > a:
                        tt = (travelled + min(max(tc, 0.0), best)) / c
                        k = int(tt / bin_width)
                        if k < n_bins:
                            hist[k] += e * (b - a)
            px += best * ux
            py += best * uy
            pz += best * uz
            travelled += best
            un = normals[face, 0] * ux + normals[face, 1] * uy + normals[face, 2] * uz
            ux -= 2.0 * un * normals[face, 0]
            uy -= 2.0 * un * normals[face, 1]
            uz -= 2.0 * un * normals[face, 2]
            e *= 1.0 - absorb[face]
            order += 1
    return hist


def trace_rays_numpy(normals, offsets, absorb, src, rcv, radius, dirs,
                     t_max, c, bin_width, min_order):
    n_bins = int(math.ceil(t_max / bin_width))
    hist = np.zeros(n_bins)
    n_rays = dirs.shape[0]
    max_len = c * t_max
    p = np.tile(src, (n_rays, 1)).astype(np.float64)
    u = dirs.astype(np.float64).copy()
    e = np.full(n_rays, 1.0 / n_rays)
    travelled = np.zeros(n_rays)
    order = 0
    active = np.ones(n_rays, dtype=bool)
    r2 = radius * radius
    while np.any(active):
        p_a, u_a = p[active], u[active]
        un = u_a @ normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (offsets[None, :] - p_a @ normals.T) / un
        t = np.where(un > 1e-12, t, np.inf)
        face = np.argmin(t, axis=1)
        best = np.maximum(t[np.arange(face.size), face], 0.0)
        if order > min_order:
            w = rcv[None, :] - p_a
            tc = np.einsum("ij,ij->i", w, u_a)
            q = np.einsum("ij,ij->i", w, w) - tc * tc
            hit = q < r2
            hc = np.sqrt(np.where(hit, r2 - q, 0.0))
            a = np.maximum(tc - hc, 0.0)
            b = np.minimum(tc + hc, best)
            hit &= b > a
            tt = (travelled[active] + np.minimum(np.maximum(tc, 0.0), best)) / c
            k = (tt / bin_width).astype(np.int64)
            hit &= k < n_bins
            hist += np.bincount(k[hit], weights=(e[active] * (b - a))[hit], minlength=n_bins)
        p[active] = p_a + best[:, None] * u_a
        travelled[active] += best
        nf = normals[face]
        u[active] = u_a - 2.0 * np.einsum("ij,ij->i", u_a, nf)[:, None] * nf
        e[active] *= 1.0 - absorb[face]
        order += 1
        active &= (travelled < max_len) & (e > 0.0)
    return hist


_impl = pick(trace_rays_numba, trace_rays_numpy)


def trace_rays(normals, offsets, absorb, src, rcv, radius, dirs, *, t_max, c,
               bin_width, min_order=-1):
    f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    return _impl(f64(normals), f64(offsets), f64(absorb), f64(src), f64(rcv),
                 float(radius), f64(dirs), float(t_max), float(c), float(bin_width),
                 int(min_order))
