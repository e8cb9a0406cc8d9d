"""Affine registration from control-point pairs.

Points are ``(x, y)`` with ``x`` the column and ``y`` the row.  A transform
is a 2x3 matrix ``[[a, b, tx], [c, d, ty]]`` acting on ``(x, y, 1)``.
:func:`warp` samples the source at ``t(p)`` for every output pixel ``p``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import DegenerateConfiguration


@dataclass(frozen=True)
class ControlPoints:
    moving: np.ndarray  # (n, 2)
    base: np.ndarray  # (n, 2)

    def __post_init__(self):
        m = np.array(self.moving, dtype=np.float64).reshape(-1, 2)
        b = np.array(self.base, dtype=np.float64).reshape(-1, 2)
        if m.shape != b.shape:
            raise DegenerateConfiguration("moving and base point counts differ")
        if m.shape[0] < 3:
            raise DegenerateConfiguration("affine registration needs at least three pairs")
        object.__setattr__(self, "moving", m)
        object.__setattr__(self, "base", b)

    @classmethod
    def from_json(cls, path) -> "ControlPoints":
        with open(path) as fh:
            pairs = json.load(fh)["pairs"]
        return cls([p["moving"] for p in pairs], [p["base"] for p in pairs])

    def to_json(self, path) -> None:
        pairs = [{"moving": list(map(float, m)), "base": list(map(float, b))} for m, b in zip(self.moving, self.base)]
        with open(path, "w") as fh:
            json.dump({"pairs": pairs}, fh, indent=2)


def _homog(m: np.ndarray) -> np.ndarray:
    return np.vstack([m, [0.0, 0.0, 1.0]])


def compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Affine map ``p -> outer(inner(p))``."""
    return (_homog(outer) @ _homog(inner))[:2]


def invert(t: np.ndarray) -> np.ndarray:
    return np.linalg.inv(_homog(np.asarray(t, dtype=np.float64)))[:2]


def apply(t: np.ndarray, pts) -> np.ndarray:
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    return p @ t[:, :2].T + t[:, 2]


def estimate_affine(cp: ControlPoints, rcond: float = 1e-10) -> np.ndarray:
    """Least-squares affine map taking ``cp.moving`` onto ``cp.base``."""
    b = cp.base
    centred = b - b.mean(axis=0)
    s = np.linalg.svd(centred, compute_uv=False)
    if s.size < 2 or s[1] <= rcond * max(s[0], 1.0):
        raise DegenerateConfiguration("base points are collinear")
    m = cp.moving
    centred_m = m - m.mean(axis=0)
    sm = np.linalg.svd(centred_m, compute_uv=False)
    if sm[1] <= rcond * max(sm[0], 1.0):
        raise DegenerateConfiguration("moving points are collinear")
    X = np.hstack([m, np.ones((m.shape[0], 1))])
    sol, *_ = np.linalg.lstsq(X, b, rcond=None)
    t = sol.T
    if abs(np.linalg.det(t[:, :2])) < 1e-12:
        raise DegenerateConfiguration("estimated transform is singular")
    return t


def residual_rms(t: np.ndarray, cp: ControlPoints) -> float:
    d = apply(t, cp.moving) - cp.base
    return float(np.sqrt((d * d).sum(axis=1).mean()))


def warp(img, t: np.ndarray) -> np.ndarray:
    """Bilinear resampling ``out[p] = img[t(p)]``; samples outside the image are zero."""
    arr = np.asarray(img, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    h, w = arr.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = t[0, 0] * xs + t[0, 1] * ys + t[0, 2]
    sy = t[1, 0] * xs + t[1, 1] * ys + t[1, 2]
    planes = arr.reshape(h, w, -1)
    out = np.empty_like(planes)
    for k in range(planes.shape[2]):
        out[..., k] = map_coordinates(planes[..., k], [sy, sx], order=1, mode="constant", cval=0.0)
    return out.reshape(arr.shape)


def align(moving, cp: ControlPoints) -> np.ndarray:
    """Resample ``moving`` into the base image frame."""
    return warp(moving, invert(estimate_affine(cp)))
