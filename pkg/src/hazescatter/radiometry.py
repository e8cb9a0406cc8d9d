"""Radiometric response curves: pixel codes to linear irradiance and back.

A curve maps each 8-bit code to a log exposure ``g(code)``.  Irradiance is
exposure divided by exposure time, ``E = exp(g(code)) / shutter``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidCurve, InvalidShutter

N_CODES = 256
CHANNELS = ("r", "g", "b")


@dataclass(frozen=True)
class ResponseCurve:
    g: np.ndarray  # (3, 256) log exposure per channel and code

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64)
        if g.ndim == 1:
            g = np.repeat(g[None], 3, axis=0)
        if g.shape != (3, N_CODES):
            raise InvalidCurve(f"curve must have 256 entries per channel, got {g.shape}")
        if np.any(np.isnan(g)) or np.any(np.diff(g, axis=1) < 0):
            raise InvalidCurve("curve must be monotone non-decreasing")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @classmethod
    def identity_log(cls) -> "ResponseCurve":
        """``g(z) = ln(z / 255)``; code 0 maps to ``-inf`` (zero irradiance)."""
        with np.errstate(divide="ignore"):
            return cls(np.log(np.arange(N_CODES) / 255.0))

    @classmethod
    def gamma(cls, gamma: float = 2.2) -> "ResponseCurve":
        with np.errstate(divide="ignore"):
            return cls(gamma * np.log(np.arange(N_CODES) / 255.0))

    @classmethod
    def from_csv(cls, path) -> "ResponseCurve":
        g = np.full((3, N_CODES), np.nan)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ch = CHANNELS.index(row["channel"].strip().lower())
                code = int(row["code"])
                if not 0 <= code < N_CODES:
                    raise InvalidCurve(f"code {code} out of range")
                g[ch, code] = float(row["log_exposure"])
        filled = ~np.isnan(g).any(axis=1)
        if not filled.any():
            raise InvalidCurve("curve file has no complete channel")
        if not filled.all():
            if filled.sum() != 1:
                raise InvalidCurve("every listed channel needs all 256 codes")
            g[:] = g[filled][0]
        return cls(g)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "code", "log_exposure"])
            for ch, name in enumerate(CHANNELS):
                for code in range(N_CODES):
                    w.writerow([name, code, repr(float(self.g[ch, code]))])


def _check_shutter(shutter: float) -> float:
    s = float(shutter)
    if not s > 0 or not np.isfinite(s):
        raise InvalidShutter(f"shutter must be positive, got {shutter}")
    return s


def linearize(codes, curve: ResponseCurve, shutter: float = 1.0) -> np.ndarray:
    """Codes ``(H, W, 3)`` in 0..255 to irradiance ``exp(g(code) - ln shutter)``."""
    s = _check_shutter(shutter)
    z = np.asarray(codes)
    if np.any(z < 0) or np.any(z > 255):
        raise InvalidCurve("codes must lie in 0..255")
    z = z.astype(np.intp)
    out = np.empty(z.shape, dtype=np.float64)
    for c in range(3):
        out[..., c] = np.exp(curve.g[c][z[..., c]]) / s
    return out


def delinearize(img, curve: ResponseCurve, shutter: float = 1.0) -> np.ndarray:
    """Irradiance to codes via the nearest curve entry in log exposure.

    Ties and flat stretches of the curve resolve to the lowest code.
    """
    s = _check_shutter(shutter)
    arr = np.asarray(img, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logx = np.log(np.maximum(arr * s, 0.0))
    out = np.empty(arr.shape, dtype=np.uint8)
    for c in range(3):
        g = curve.g[c]
        v = logx[..., c]
        hi = np.clip(np.searchsorted(g, v, side="left"), 0, N_CODES - 1)
        lo = np.clip(hi - 1, 0, N_CODES - 1)
        with np.errstate(invalid="ignore"):
            d_hi = np.abs(g[hi] - v)
            d_lo = np.abs(v - g[lo])
        pick = np.where(np.nan_to_num(d_lo, nan=np.inf) <= np.nan_to_num(d_hi, nan=np.inf), lo, hi)
        # Equal curve values: walk back to the first code with that value.
        first = np.searchsorted(g, g[pick], side="left")
        out[..., c] = np.clip(first, 0, 255)
    return out


def save_curve(curve: ResponseCurve, path) -> None:
    curve.to_csv(Path(path))
