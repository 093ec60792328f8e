"""Explicit finite-volume stepping of the room-acoustic diffusion equation.

Cell-centred grid. Interior faces exchange ``D * (w_j - w_i) / da^2``; a wall
face removes ``h_eff * w_i / da`` where ``h_eff`` already includes the
half-cell correction. The receiver trace is a trilinear read of the cell
values after every step.
"""
import numpy as np

from .._backend import njit, pick


@njit
def run_diffusion_numba(w, diff, spacing, h_eff, dt, n_steps, ridx, rwts):
    nx, ny, nz = w.shape
    cx = diff / spacing[0] ** 2
    cy = diff / spacing[1] ** 2
    cz = diff / spacing[2] ** 2
    bx0, bx1 = h_eff[0] / spacing[0], h_eff[1] / spacing[0]
    by0, by1 = h_eff[2] / spacing[1], h_eff[3] / spacing[1]
    bz0, bz1 = h_eff[4] / spacing[2], h_eff[5] / spacing[2]
    env = np.empty(n_steps + 1)
    cur = w.copy()
    nxt = np.empty_like(cur)
    for s in range(n_steps + 1):
        acc = 0.0
        for q in range(ridx.shape[0]):
            acc += rwts[q] * cur[ridx[q, 0], ridx[q, 1], ridx[q, 2]]
        env[s] = acc
        if s == n_steps:
            break
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    v = cur[i, j, k]
                    flux = 0.0
                    if i > 0:
                        flux += cx * (cur[i - 1, j, k] - v)
                    else:
                        flux -= bx0 * v
                    if i < nx - 1:
                        flux += cx * (cur[i + 1, j, k] - v)
                    else:
                        flux -= bx1 * v
                    if j > 0:
                        flux += cy * (cur[i, j - 1, k] - v)
                    else:
                        flux -= by0 * v
                    if j < ny - 1:
                        flux += cy * (cur[i, j + 1, k] - v)
                    else:
                        flux -= by1 * v
                    if k > 0:
                        flux += cz * (cur[i, j, k - 1] - v)
                    else:
                        flux -= bz0 * v
                    if k < nz - 1:
                        flux += cz * (cur[i, j, k + 1] - v)
                    else:
                        flux -= bz1 * v
                    nxt[i, j, k] = v + dt * flux
        cur, nxt = nxt, cur
    return env


def run_diffusion_numpy(w, diff, spacing, h_eff, dt, n_steps, ridx, rwts):
    coef = diff / spacing ** 2
    bnd = h_eff / np.repeat(spacing, 2)
    cur = w.copy()
    env = np.empty(n_steps + 1)
    sel = (ridx[:, 0], ridx[:, 1], ridx[:, 2])
    for s in range(n_steps + 1):
        env[s] = np.dot(rwts, cur[sel])
        if s == n_steps:
            break
        flux = np.zeros_like(cur)
        for a in range(3):
            g = np.diff(cur, axis=a) * coef[a]
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[a] = slice(0, -1)
            hi[a] = slice(1, None)
            flux[tuple(lo)] += g
            flux[tuple(hi)] -= g
            first = [slice(None)] * 3
            last = [slice(None)] * 3
            first[a] = 0
            last[a] = -1
            flux[tuple(first)] -= bnd[2 * a] * cur[tuple(first)]
            flux[tuple(last)] -= bnd[2 * a + 1] * cur[tuple(last)]
        cur = cur + dt * flux
    return env


_impl = pick(run_diffusion_numba, run_diffusion_numpy)


def stable_dt(diff, spacing, h_eff, shape):
    """Largest time step keeping every update a convex combination (max principle)."""
    rate = 0.0
    for a in range(3):
        inner = diff / spacing[a] ** 2
        lo, hi = h_eff[2 * a] / spacing[a], h_eff[2 * a + 1] / spacing[a]
        if shape[a] == 1:
            rate += lo + hi
        else:
            rate += max(2.0 * inner, inner + max(lo, hi))
    return 1.0 / rate


def run_diffusion(w0, diff, spacing, h_eff, dt, n_steps, ridx, rwts):
    return _impl(np.ascontiguousarray(w0, dtype=np.float64), float(diff),
                 np.asarray(spacing, dtype=np.float64), np.asarray(h_eff, dtype=np.float64),
                 float(dt), int(n_steps), np.ascontiguousarray(ridx, dtype=np.int64),
                 np.ascontiguousarray(rwts, dtype=np.float64))
