"""Time the hot kernels under the numba and numpy backends.

Usage::

    python3 benchmarks/bench_kernels.py            # both backends, side by side
    python3 benchmarks/bench_kernels.py --repeat 5

The backend is fixed at import time by ``REVERBAUG_BACKEND``, so each backend
runs in its own interpreter. Numba timings exclude the first (compiling) call.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _cases():
    from reverbaug import _kernels as K
    from reverbaug.acoustics import Diffusion, HybridImageRay, ImagePolyhedra, simulate_rir
    from reverbaug.geometry import Room, Scenario

    rng = np.random.default_rng(0)
    x, h = rng.standard_normal(4000), rng.standard_normal(1000)
    delays = rng.uniform(0, 15000, 20000)
    amps = rng.standard_normal(20000)
    room = Room.shoebox(7.0, 5.0, 3.0)
    sc = Scenario(room, (2.0, 1.5, 1.4), (5.1, 3.2, 1.6), 0.6, "bench", 1)
    beta = np.full((6, 1), 0.9)
    omegas = rng.uniform(100, 2000, 300)

    return {
        "direct_convolve 4k*1k": lambda: K.direct_convolve(x, h),
        "fractional delays 20k": lambda: K.accumulate_impulses(np.zeros(16000), delays, amps),
        "shoebox images 0.6 s": lambda: K.shoebox_images(9600, room.dims, sc.source_pos,
                                                        sc.receiver_pos, beta, max_dist=206.0,
                                                        fs=16000, c=343.0),
        "modal sum 300 modes": lambda: K.modal_sum(9600, omegas, np.full(300, 5.0),
                                                   np.ones(300), 16000),
        "simulate image": lambda: simulate_rir(sc, ImagePolyhedra()),
        "simulate hybrid (rays)": lambda: simulate_rir(sc, HybridImageRay()),
        "simulate diffusion": lambda: simulate_rir(sc, Diffusion()),
    }


def _run(repeat):
    from reverbaug import BACKEND

    out = {}
    for name, fn in _cases().items():
        fn()  # warm-up / JIT compile
        best = np.inf
        for _ in range(repeat):
            t = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t)
        out[name] = best
    return BACKEND, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        backend, res = _run(args.repeat)
        print(json.dumps({"backend": backend, "times": res}))
        return
    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, REVERBAUG_BACKEND=backend)
        p = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
                           env=env, capture_output=True, text=True, check=True)
        results[backend] = json.loads(p.stdout.strip().splitlines()[-1])["times"]
    print(f"{'kernel':<26}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name in results["numba"]:
        a, b = results["numba"][name] * 1e3, results["numpy"][name] * 1e3
        print(f"{name:<26}{a:>12.2f}{b:>12.2f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
