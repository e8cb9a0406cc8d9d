"""Dark-channel-prior dehazing without soft matting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter

from .core import T_MIN, make_patch_grid
from .errors import InvalidAirlight


@dataclass(frozen=True)
class WindowSpec:
    height: int = 10
    width: int = 10
    mode: str = "tiled"  # tiled | sliding

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("window dims must be positive")
        if self.mode not in ("tiled", "sliding"):
            raise ValueError(f"unknown window mode {self.mode!r}")

    @classmethod
    def parse(cls, text: str, mode: str = "tiled") -> "WindowSpec":
        h, w = (int(v) for v in text.lower().split("x"))
        return cls(h, w, mode)


SLIDING_DEFAULT = WindowSpec(13, 9, "sliding")


def dark_channel(img, win: WindowSpec = WindowSpec()) -> np.ndarray:
    """Minimum over channels, then over the window, per pixel.

    Tiled windows give one value per tile broadcast to its pixels.  Sliding
    windows cover rows ``-(h//2) .. h-1-h//2`` around the pixel (likewise for
    columns), with edge pixels replicated outward.
    """
    a = np.asarray(img, dtype=np.float64)
    m = a.min(axis=2)
    if win.mode == "tiled":
        grid = make_patch_grid(m.shape[0], m.shape[1], win.height, win.width)
        return grid.expand(grid.to_patches(m).min(axis=1))
    return minimum_filter(m, size=(win.height, win.width), mode="nearest")


def estimate_airlight_dc(img, dark, percentile: float = 0.0) -> np.ndarray:
    """Airlight colour from the dark channel's brightest region.

    With ``percentile == 0`` the candidates are the pixels attaining the dark
    channel maximum and the one with the largest channel sum wins (first in
    row-major order on ties).  Otherwise the image colours at the top
    ``percentile`` fraction of dark-channel pixels are averaged.
    """
    a = np.asarray(img, dtype=np.float64)
    d = np.asarray(dark, dtype=np.float64).ravel()
    flat = a.reshape(-1, 3)
    if percentile <= 0:
        cand = np.flatnonzero(d == d.max())
        return flat[cand[np.argmax(flat[cand].sum(axis=1))]].copy()
    k = max(1, int(np.ceil(percentile * d.size)))
    order = np.argsort(-d, kind="stable")[:k]
    return flat[order].mean(axis=0)


@dataclass(frozen=True)
class DcResult:
    transmission: np.ndarray  # (H, W)
    dehazed: np.ndarray
    scaled_depth: np.ndarray
    airlight: np.ndarray


def dehaze_dc(img, win: WindowSpec, A, t_min: float = T_MIN) -> DcResult:
    a = np.asarray(img, dtype=np.float64)
    A = np.broadcast_to(np.asarray(A, dtype=np.float64), (3,))
    if np.any(A <= 0):
        raise InvalidAirlight(f"airlight must be positive, got {A}")
    t = np.clip(1.0 - dark_channel(a / A, win), t_min, 1.0)
    t3 = t[..., None]
    dehazed = (a - A * (1.0 - t3)) / t3
    return DcResult(t, dehazed, -np.log(t), A.copy())
