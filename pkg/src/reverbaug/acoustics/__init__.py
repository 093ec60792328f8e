from .analysis import absorption_from_rt60, analyze_rir, energy_decay_curve, sabine_absorption
from .models import (MODEL_KINDS, OCTAVE_CENTERS, AngleFreqReflection, Diffusion,
                     HybridImageRay, ImagePolyhedra, LowFreqBoundary, Rir, RirAnalysis,
                     kind_from_dict, kind_from_name, kind_to_dict)
from .simulate import simulate_rir
from .io import read_rir, write_rir

__all__ = [
    "absorption_from_rt60", "analyze_rir", "energy_decay_curve", "sabine_absorption",
    "MODEL_KINDS", "OCTAVE_CENTERS", "AngleFreqReflection", "Diffusion", "HybridImageRay",
    "ImagePolyhedra", "LowFreqBoundary", "Rir", "RirAnalysis", "kind_from_dict",
    "kind_from_name", "kind_to_dict", "simulate_rir", "read_rir", "write_rir",
]
