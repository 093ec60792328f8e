"""Hot numeric kernels, each with a numba and a numpy implementation.

The public name in each module dispatches on ``reverbaug._backend.BACKEND``;
the ``*_numba`` / ``*_numpy`` variants stay importable for cross-checks and
benchmarks.
"""
from .convolution import direct_convolve
from .fracdelay import accumulate_impulses
from .images import shoebox_images
from .rays import trace_rays
from .diffusion import run_diffusion
from .modal import modal_sum

__all__ = [
    "direct_convolve",
    "accumulate_impulses",
    "shoebox_images",
    "trace_rays",
    "run_diffusion",
    "modal_sum",
]
