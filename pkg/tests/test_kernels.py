"""Numba and numpy kernel variants agree, and both match simple oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reverbaug import BACKEND, _backend
from reverbaug._kernels import convolution, diffusion, fracdelay, images, modal, rays


def test_backend_flag_is_valid():
    assert BACKEND in ("numba", "numpy")
    assert _backend.pick(1, 2) == (1 if BACKEND == "numba" else 2)


def test_bad_backend_env_rejected(monkeypatch):
    import importlib
    monkeypatch.setenv("REVERBAUG_BACKEND", "fortran")
    with pytest.raises(ImportError):
        importlib.reload(_backend)
    monkeypatch.setenv("REVERBAUG_BACKEND", BACKEND)
    importlib.reload(_backend)


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 2 ** 32 - 1))
def test_direct_convolve_matches_numpy(n, m, seed):
    rng = np.random.default_rng(seed)
    x, h = rng.standard_normal(n), rng.standard_normal(m)
    ref = np.convolve(x, h)
    np.testing.assert_allclose(convolution.direct_convolve_numba(x, h), ref, atol=1e-12)
    np.testing.assert_allclose(convolution.direct_convolve_numpy(x, h), ref, atol=1e-12)


def test_direct_convolve_hand_example():
    np.testing.assert_array_equal(convolution.direct_convolve([1, 2, 3], [1, 1]), [1, 3, 5, 3])
    with pytest.raises(ValueError):
        convolution.direct_convolve([], [1.0])


def test_integer_delay_is_exact_impulse():
    for impl in (fracdelay.accumulate_impulses_numba, fracdelay.accumulate_impulses_numpy):
        for taps in (1, 32):
            out = np.zeros(64)
            impl(out, np.array([10.0, 20.0]), np.array([0.5, -2.0]), taps)
            expect = np.zeros(64)
            expect[10], expect[20] = 0.5, -2.0
            np.testing.assert_allclose(out, expect, atol=1e-15)


def test_fractional_delay_reconstructs_bandlimited_signal():
    # a half-sample delay of a low-frequency tone is well interpolated by 32 taps
    n = 400
    out = np.zeros(n)
    f = 0.05  # cycles per sample
    t0 = np.arange(-200, 600)
    fracdelay.accumulate_impulses(out, t0 + 0.5, np.cos(2 * np.pi * f * t0), 32)
    k = np.arange(50, 350)
    np.testing.assert_allclose(out[k], np.cos(2 * np.pi * f * (k - 0.5)), atol=2e-3)


def test_fracdelay_backends_agree(rng):
    delays = rng.uniform(-5, 205, 500)
    amps = rng.standard_normal(500)
    for taps in (1, 8, 32):
        a, b = np.zeros(200), np.zeros(200)
        fracdelay.accumulate_impulses_numba(a, delays, amps, taps)
        fracdelay.accumulate_impulses_numpy(b, delays, amps, taps)
        np.testing.assert_allclose(a, b, atol=1e-12)


def _image_args(use_angle):
    dims = np.array([5.0, 4.0, 3.0])
    src, rcv = np.array([1.0, 1.2, 1.4]), np.array([3.5, 2.9, 1.6])
    beta = np.tile(np.array([[0.9, 0.7]]), (6, 1))
    xi = np.tile(np.array([[0.05, 0.2]]), (6, 1)) if use_angle else beta
    return dims, src, rcv, beta, xi


@pytest.mark.parametrize("use_angle", [False, True])
@pytest.mark.parametrize("max_order", [-1, 0, 3])
def test_shoebox_images_backends_agree(use_angle, max_order):
    dims, src, rcv, beta, xi = _image_args(use_angle)
    a, b = np.zeros((2, 2000)), np.zeros((2, 2000))
    args = (dims, src, rcv, beta, xi, use_angle, max_order, 40.0, 16000 / 343.0, 32)
    images.shoebox_images_numba(a, *args)
    images.shoebox_images_numpy(b, *args)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_shoebox_first_order_images_by_hand():
    # nearest-sample rendering: each of the six first-order images lands at its own delay
    dims, src, rcv, _, _ = _image_args(False)
    beta = np.full((6, 1), 0.8)
    fs, c = 16000.0, 343.0
    h = images.shoebox_images(4000, dims, src, rcv, beta, max_order=1, max_dist=100.0,
                              fs=fs, c=c, taps=1)[0]
    expect = np.zeros(4000)
    d0 = np.linalg.norm(src - rcv)
    expect[int(round(d0 * fs / c))] += 1 / (4 * np.pi * d0)
    for a in range(3):
        for wall in (0.0, dims[a]):
            img = src.copy()
            img[a] = 2 * wall - img[a]
            d = np.linalg.norm(img - rcv)
            expect[int(round(d * fs / c))] += 0.8 / (4 * np.pi * d)
    np.testing.assert_allclose(h, expect, atol=1e-14)


def test_reflection_coefficient_limits():
    # normal incidence recovers (1 - xi) / (1 + xi); grazing incidence reflects with -1
    xi = 0.25
    assert images._reflection(xi, 1.0) == pytest.approx(0.75 / 1.25)
    assert images._reflection(xi, 0.0) == pytest.approx(-1.0)
    assert images._reflection(-1.0, 0.3) == 0.0


def _box_planes(dims):
    L, W, H = dims
    normals = np.array([[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]],
                       dtype=float)
    return normals, np.array([0.0, L, 0.0, W, 0.0, H])


def test_rays_backends_agree(rng):
    normals, offsets = _box_planes((6.0, 5.0, 3.0))
    dirs = rng.standard_normal((500, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    absorb = np.full(6, 0.2)
    args = (normals, offsets, absorb, np.array([1.0, 1.0, 1.5]), np.array([4.0, 3.0, 1.5]),
            0.5, dirs, 0.3, 343.0, 1e-3, 1)
    a = rays.trace_rays_numba(*args)
    b = rays.trace_rays_numpy(*args)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


def test_rays_direct_sound_energy():
    # fully absorbing walls leave only the direct pass; the sphere intercepts a
    # fraction pi r^2 / (4 pi d^2) of the rays with mean chord 4 r / 3
    normals, offsets = _box_planes((20.0, 20.0, 20.0))
    g = np.random.default_rng(0).standard_normal((200_000, 3))
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    r, d = 0.5, 5.0
    absorb = np.ones(6)
    hist = rays.trace_rays(normals, offsets, absorb, np.array([5.0, 10, 10]),
                           np.array([5.0 + d, 10, 10]), r, dirs, t_max=0.1, c=343.0,
                           bin_width=1e-3)
    expect = (r * r / (4 * d * d)) * (4 * r / 3)
    assert hist.sum() == pytest.approx(expect, rel=0.05)


def test_modal_backends_agree(rng):
    om = rng.uniform(100, 3000, 40)
    de = rng.uniform(1, 30, 40)
    w = rng.standard_normal(40)
    a, b = np.zeros(3000), np.zeros(3000)
    modal.modal_sum_numba(a, om, de, w, 16000.0)
    modal.modal_sum_numpy(b, om, de, w, 16000.0)
    np.testing.assert_allclose(a, b, atol=1e-9 * np.abs(w).sum())
    t = np.arange(3000) / 16000.0
    ref = (w[:, None] * np.exp(-de[:, None] * t) * np.sin(om[:, None] * t)).sum(axis=0)
    np.testing.assert_allclose(a, ref, atol=1e-9 * np.abs(w).sum())


def _diffusion_case():
    shape = (6, 5, 3)
    spacing = np.array([1.0, 1.0, 1.0])
    h_eff = np.full(6, 20.0)
    diff = 150.0
    w0 = np.zeros(shape)
    w0[1, 1, 1] = 1.0
    ridx = np.array([[4, 3, 1], [4, 3, 2]])
    rwts = np.array([0.5, 0.5])
    dt = 0.9 * diffusion.stable_dt(diff, spacing, h_eff, shape)
    return w0, diff, spacing, h_eff, dt, 400, ridx, rwts


def test_diffusion_backends_agree():
    args = _diffusion_case()
    a = diffusion.run_diffusion_numba(*args)
    b = diffusion.run_diffusion_numpy(*args)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-300)


def test_diffusion_closed_room_conserves_energy():
    w0, diff, spacing, _, _, _, ridx, rwts = _diffusion_case()
    h0 = np.zeros(6)
    dt = 0.9 * diffusion.stable_dt(diff, spacing, h0, w0.shape)
    env = diffusion.run_diffusion(w0, diff, spacing, h0, dt, 3000, ridx, rwts)
    # without wall losses the field relaxes to the uniform mean
    assert env[-1] == pytest.approx(1.0 / w0.size, rel=1e-6)


def test_diffusion_decay_rate_matches_wall_exchange():
    # a single cell with exchange h on all walls decays at rate sum(h / dx)
    shape = (1, 1, 1)
    spacing = np.array([2.0, 3.0, 4.0])
    h = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    rate = sum(h[2 * a] / spacing[a] + h[2 * a + 1] / spacing[a] for a in range(3))
    dt = 1e-4
    env = diffusion.run_diffusion(np.ones(shape), 100.0, spacing, h, dt, 100,
                                  np.zeros((1, 3), dtype=np.int64), np.ones(1))
    np.testing.assert_allclose(env, (1 - rate * dt) ** np.arange(101), rtol=1e-12)


def test_stable_dt_keeps_positivity():
    w0, diff, spacing, h_eff, _, _, ridx, rwts = _diffusion_case()
    dt = diffusion.stable_dt(diff, spacing, h_eff, w0.shape)
    env = diffusion.run_diffusion(w0, diff, spacing, h_eff, dt, 500, ridx, rwts)
    assert np.all(env >= 0)
    # well above the bound the explicit scheme oscillates and goes negative somewhere
    bad = diffusion.run_diffusion(w0, diff, spacing, h_eff, 2.5 * dt, 200, ridx, rwts)
    assert np.any(bad < 0) or not np.all(np.isfinite(bad))
