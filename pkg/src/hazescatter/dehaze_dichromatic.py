"""Dichromatic dehazing from one scene under two weather conditions.

Every scene colour is ``E = p D_hat + q A_hat``.  The pair ``(E1, E2)`` of a
point spans a plane containing ``A_hat``; intersecting all such planes gives
the airlight direction.  Removing the airlight difference from ``E2`` leaves a
multiple of ``E1`` whose factor is the direct-transmission ratio ``p2 / p1``.
The ratios and airlight magnitudes lie on a line whose coefficients are the
horizon brightnesses, and those give the optical-thickness difference per
point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CollinearSamples,
    DegeneratePoint,
    DegenerateScene,
    InvalidAirlight,
    InvalidCube,
    InvalidImage,
    InvalidUnitVector,
    NoAnchorFound,
)

PARALLEL_TOL = 1e-12
ANCHOR_RTOL = 1e-6


@dataclass(frozen=True)
class HorizonRadiances:
    a_inf1: float
    a_inf2: float

    def __post_init__(self):
        if not (self.a_inf1 > 0 and self.a_inf2 > 0):
            raise InvalidAirlight(f"horizon radiances must be positive, got {self.a_inf1}, {self.a_inf2}")

    def scaled(self, factor: float) -> "HorizonRadiances":
        return HorizonRadiances(self.a_inf1 * factor, self.a_inf2 * factor)


@dataclass(frozen=True)
class DichromaticResult:
    dehazed: np.ndarray  # (H, W, 3) E1 with airlight removed
    dot_depth: np.ndarray  # (H, W) (beta2 - beta1) z, NaN where undefined
    alpha: np.ndarray  # (H, W) estimated beta1 z / DOT z, NaN where undefined
    beta1_depth: np.ndarray  # (H, W) beta1 z propagated from the anchors
    airlight_mag: np.ndarray  # (H, W) q for E1
    anchors: np.ndarray  # flat indices of anchor pixels


def _points(e) -> np.ndarray:
    a = np.asarray(e, dtype=np.float64)
    if a.shape[-1] != 3:
        raise InvalidImage(f"expected RGB data, got shape {a.shape}")
    return a.reshape(-1, 3)


def airlight_direction(e1, e2, rtol: float = 1e-12) -> np.ndarray:
    """Unit vector closest to lying in every dichromatic plane.

    Minimises ``sum_i (N_i . a)^2`` over unit ``a`` with ``N_i = E1_i x E2_i``:
    the eigenvector of ``sum N N^T`` with the smallest eigenvalue.
    """
    p1, p2 = _points(e1), _points(e2)
    if p1.shape != p2.shape:
        raise InvalidImage("E1 and E2 differ in shape")
    n = np.cross(p1, p2)
    scale = max(float((p1 * p1).sum() * (p2 * p2).sum() / max(len(p1), 1)), 1e-300)
    M = n.T @ n
    if np.trace(M) <= rtol * scale * len(p1):
        raise DegenerateScene("colours do not change between the two conditions except in scale")
    w, v = np.linalg.eigh(M)
    if w[1] <= rtol * w[2]:
        raise DegenerateScene("all dichromatic planes coincide; the direction is not determined")
    a = v[:, 0]
    if a.sum() < 0:
        a = -a
    return a / np.linalg.norm(a)


def dt_ratio_and_tA(e1, e2, a_hat) -> tuple[np.ndarray, np.ndarray]:
    """Direct-transmission ratio ``p2/p1`` and airlight difference ``t`` per point.

    ``e2 - t a_hat`` is parallel to ``e1``; the ratio is its length over
    ``|e1|``.  Works on single vectors or stacks of them.  Raises
    :class:`DegeneratePoint` when ``a_hat`` is parallel to ``e1``.
    """
    single = np.ndim(e1) == 1
    p1, p2 = _points(e1), _points(e2)
    a = np.asarray(a_hat, dtype=np.float64)
    ratio, t, ok = _ratio_t(p1, p2, a)
    if not ok.all():
        raise DegeneratePoint("airlight direction is parallel to E1")
    if single:
        return ratio[0], abs(t[0])
    return ratio, np.abs(t)


def _ratio_t(p1, p2, a):
    axe1 = np.cross(a, p1)
    den = (axe1 * axe1).sum(axis=1)
    norm1 = np.linalg.norm(p1, axis=1)
    ok = den > PARALLEL_TOL * np.maximum(norm1, 1e-300) ** 2
    safe = np.where(ok, den, 1.0)
    t = np.where(ok, (axe1 * np.cross(p2, p1)).sum(axis=1) / safe, np.nan)
    resid = p2 - t[:, None] * a
    ratio = np.where(ok, np.linalg.norm(resid, axis=1) / np.where(norm1 > 0, norm1, 1.0), np.nan)
    return ratio, t, ok


def fit_horizon_radiances(ratios, cs, weights=None) -> HorizonRadiances:
    """Least-squares line ``c = A_inf2 - ratio * A_inf1``.

    Optional ``weights`` multiply each squared residual.
    """
    r = np.asarray(ratios, dtype=np.float64).ravel()
    c = np.asarray(cs, dtype=np.float64).ravel()
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    keep = np.isfinite(r) & np.isfinite(c) & (w > 0)
    r, c, w = r[keep], c[keep], w[keep]
    if r.size < 2 or np.ptp(r) <= 1e-12 * max(abs(r).max(), 1.0):
        raise CollinearSamples("need at least two distinct ratios")
    slope, intercept = np.polyfit(r, c, 1, w=np.sqrt(w))
    return HorizonRadiances(-float(slope), float(intercept))


def default_cube_dim(e1) -> float:
    return 1.1 * float(np.linalg.norm(_points(e1), axis=1).max())


def cube_distance(p1, a) -> np.ndarray:
    """Distance along ``-a`` from each colour to the nearest zero face of the RGB cube."""
    return (p1 / a).min(axis=1)


def dichromatic_dehaze(
    e1,
    e2,
    a_hat,
    horizon: HorizonRadiances,
    cube_dim: float | None = None,
    anchor_q: str = "cube",
    anchor_rtol: float = ANCHOR_RTOL,
) -> DichromaticResult:
    """Scaled depth, anchor-propagated airlight and the dehazed first image.

    ``anchor_q`` chooses the airlight magnitude assumed at anchor points:
    ``"cube"`` uses the cube distance (exact for colours on a cube face),
    ``"norm"`` uses ``|E1|`` (exact only for pure airlight).
    """
    e1a = np.asarray(e1, dtype=np.float64)
    shape = e1a.shape[:-1]
    p1, p2 = _points(e1), _points(e2)
    a = np.asarray(a_hat, dtype=np.float64)
    if np.any(a <= 0):
        raise InvalidUnitVector("airlight direction needs positive components for the cube construction")
    dim = default_cube_dim(e1) if cube_dim is None else float(cube_dim)
    if dim <= np.abs(p1).max():
        raise InvalidCube(f"cube dimension {dim} must exceed the largest pixel value")
    A1, A2 = horizon.a_inf1, horizon.a_inf2

    ratio, _, ok = _ratio_t(p1, p2, a)
    ok &= ratio > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        dot = np.where(ok, np.log(A2 / A1) - np.log(ratio), np.nan)
        q_cube = cube_distance(p1, a)
        frac = q_cube / A1
        b1_est = np.where(frac < 1, -np.log1p(-np.minimum(frac, 1.0)), np.nan)
        alpha = np.where(ok & (dot > 0), b1_est / dot, np.nan)
    valid = np.isfinite(alpha)
    if not valid.any():
        raise NoAnchorFound("no point has a finite cube-based optical thickness")
    amin = np.nanmin(alpha)
    anchors = np.flatnonzero(valid & (alpha <= amin + anchor_rtol * abs(amin)))

    if anchor_q == "cube":
        q_anchor = q_cube[anchors]
    elif anchor_q == "norm":
        q_anchor = np.linalg.norm(p1[anchors], axis=1)
    else:
        raise ValueError(f"unknown anchor_q {anchor_q!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        b1_anchor = -np.log1p(-np.minimum(q_anchor / A1, 1.0))
    # Relative optical thickness carries beta1 z from each anchor to every point.
    slopes = b1_anchor / dot[anchors]
    bz_sum = np.zeros_like(dot)
    q_sum = np.zeros_like(dot)
    for k in range(0, slopes.size, 256):
        bz = slopes[k : k + 256, None] * dot[None, :]
        bz_sum += bz.sum(axis=0)
        q_sum += (A1 * -np.expm1(-bz)).sum(axis=0)
    bz_mean = bz_sum / slopes.size
    q = q_sum / slopes.size
    dehazed = p1 - q[:, None] * a
    return DichromaticResult(
        dehazed=dehazed.reshape(*shape, 3),
        dot_depth=dot.reshape(shape),
        alpha=alpha.reshape(shape),
        beta1_depth=bz_mean.reshape(shape),
        airlight_mag=q.reshape(shape),
        anchors=anchors,
    )


@dataclass(frozen=True)
class DichromaticFit:
    a_hat: np.ndarray
    horizon: HorizonRadiances
    result: DichromaticResult


def dichromatic_pipeline(e1, e2, horizon_scale: float = 1.0, weighted: bool = True, **kw) -> DichromaticFit:
    """Direction, line fit and dehazing in one call.

    ``horizon_scale`` multiplies both fitted horizon radiances; sweeps use it
    to inject airlight-magnitude errors.  With ``weighted`` each point enters
    the line fit with weight ``|A_hat x E1|^2``: colours close to the airlight
    direction carry almost no ratio information and mostly noise.
    """
    a = airlight_direction(e1, e2)
    p1, p2 = _points(e1), _points(e2)
    ratio, t, ok = _ratio_t(p1, p2, a)
    w = (np.cross(a, p1[ok]) ** 2).sum(axis=1) if weighted else None
    horizon = fit_horizon_radiances(ratio[ok], np.abs(t[ok]), w).scaled(horizon_scale)
    return DichromaticFit(a, horizon, dichromatic_dehaze(e1, e2, a, horizon, **kw))
