"""Room impulse response simulation and reverberant corpus augmentation for VAD training."""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
