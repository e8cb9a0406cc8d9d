"""Atmospheric scattering from sequences of hazy images.

Simulate haze with known ground truth, estimate transmission with four
dehazing methods, and split transmission series into per-image scattering
coefficients and one depthmap.
"""
__version__ = "0.1.0"

from .cdc import CdcConfig, CdcResult, ScatterSeries, cdc_solve, scattering_error
from .co import CoConfig, CoResult, co_multistart, co_solve
from .core import ImageSequence, PatchGrid, Rect, TransmissionSeries, linear_image, make_patch_grid
from .errors import HazeError
from .hazesim import HazeParams, SceneTruth, random_scene, simulate_haze

__all__ = [
    "CdcConfig",
    "CdcResult",
    "CoConfig",
    "CoResult",
    "HazeError",
    "HazeParams",
    "ImageSequence",
    "PatchGrid",
    "Rect",
    "ScatterSeries",
    "SceneTruth",
    "TransmissionSeries",
    "cdc_solve",
    "co_multistart",
    "co_solve",
    "linear_image",
    "make_patch_grid",
    "random_scene",
    "scattering_error",
    "simulate_haze",
]
