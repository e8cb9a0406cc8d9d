"""Polarization dehazing from a best/worst polarizer pair and a sky patch.

Sky statistics give the degree of polarization ``p`` and the airlight at
infinity per channel.  Per pixel the airlight is ``(worst - best) / p``; the
remainder of the total intensity is attenuated direct transmission.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import T_MIN, Rect
from .errors import DegenerateDOP, InvalidImage, ZeroSkyIrradiance

DEFAULT_BIAS = 1.09


@dataclass(frozen=True)
class PolEstimate:
    p: np.ndarray  # (3,)
    a_inf: np.ndarray  # (3,)
    bias: float = 1.0

    @classmethod
    def exact(cls, dop, a_inf) -> "PolEstimate":
        return cls(np.broadcast_to(np.asarray(dop, float), (3,)).copy(),
                   np.broadcast_to(np.asarray(a_inf, float), (3,)).copy(), 1.0)


@dataclass(frozen=True)
class PolResult:
    dehazed: np.ndarray
    airlight: np.ndarray
    transmission: np.ndarray  # (H, W, 3)
    scaled_depth: np.ndarray  # (H, W), mean over channels of -ln t


def _pair(best, worst):
    b = np.asarray(best, dtype=np.float64)
    w = np.asarray(worst, dtype=np.float64)
    if b.shape != w.shape or b.ndim != 3 or b.shape[2] != 3:
        raise InvalidImage(f"best {b.shape} and worst {w.shape} must be equal (H, W, 3)")
    return b, w


def estimate_sky_params(best, worst, sky: Rect, bias: float = DEFAULT_BIAS) -> PolEstimate:
    b, w = _pair(best, worst)
    sky.check(*b.shape[:2])
    rs, cs = sky.slices
    sb, sw = b[rs, cs].reshape(-1, 3), w[rs, cs].reshape(-1, 3)
    total = sb + sw
    if np.any(total == 0):
        raise ZeroSkyIrradiance("sky patch has zero total irradiance")
    p = np.minimum(((sw - sb) / total).mean(axis=0) * bias, 1.0)
    return PolEstimate(p, total.mean(axis=0), bias)


def dehaze_pol(best, worst, est: PolEstimate, t_min: float = T_MIN) -> PolResult:
    b, w = _pair(best, worst)
    p = np.asarray(est.p, dtype=np.float64)
    if np.any(p <= 0):
        raise DegenerateDOP(f"degree of polarization must be positive, got {p}")
    airlight = (w - b) / p
    direct = b + w - airlight
    t = np.clip(1.0 - airlight / np.asarray(est.a_inf, dtype=np.float64), t_min, 1.0)
    return PolResult(direct / t, airlight, t, (-np.log(t)).mean(axis=2))
