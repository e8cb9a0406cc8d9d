"""Constant Depth Constraint: split transmittance maps into per-time betas and one depthmap.

With optical thickness ``L_i(x) = -ln T_i(x)`` the solver minimises
``sum_i sum_x (beta_i z(x) - L_i(x))^2`` by alternating the exact
least-squares solutions for ``beta`` and ``z``, with ``beta`` projected onto
``[0, 1]`` and the brightest image's ``beta`` pinned to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import T_MIN, PatchGrid, TransmissionSeries
from .errors import AllOpaque, LengthMismatch


@dataclass(frozen=True)
class CdcConfig:
    tol: float = 1e-5
    max_iters: int = 500
    t_min: float = T_MIN
    init: float = 1e-4

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class ScatterSeries:
    betas: np.ndarray
    clamp_index: int

    def rescaled(self) -> np.ndarray:
        return rescale_max(self.betas)


@dataclass(frozen=True)
class DepthMap:
    values: np.ndarray
    scale_kind: str = "unscaled"  # unscaled | scaled_by_beta
    grid: Optional[PatchGrid] = None

    def as_map(self) -> np.ndarray:
        if self.grid is not None and self.values.ndim == 1:
            return self.grid.expand(self.values)
        return self.values


@dataclass(frozen=True)
class CdcResult:
    scatter: ScatterSeries
    depth: DepthMap
    objective_trace: np.ndarray
    iterations: int
    converged: bool


def rescale_max(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    m = v.max()
    return v / m if m > 0 else v.copy()


def optical_thickness(T, t_min: float = T_MIN) -> np.ndarray:
    """``-ln T`` with ``T`` clamped to ``[t_min, 1]``."""
    return -np.log(np.clip(np.asarray(T, dtype=np.float64), t_min, 1.0))


def scaled_depth_from_T(T, t_min: float = T_MIN) -> DepthMap:
    return DepthMap(optical_thickness(T, t_min), scale_kind="scaled_by_beta")


def cdc_objective(betas, z, L) -> float:
    L = np.asarray(L, dtype=np.float64).reshape(len(betas), -1)
    r = np.outer(betas, np.ravel(z)) - L
    return float((r * r).sum())


def cdc_gradients(betas, z, L) -> tuple[np.ndarray, np.ndarray]:
    """Exact partials of :func:`cdc_objective` with respect to ``betas`` and ``z``."""
    betas = np.asarray(betas, dtype=np.float64)
    zf = np.ravel(np.asarray(z, dtype=np.float64))
    L = np.asarray(L, dtype=np.float64).reshape(len(betas), -1)
    r = np.outer(betas, zf) - L
    return 2.0 * r @ zf, (2.0 * betas @ r).reshape(np.shape(z))


def cdc_solve(
    T,
    cfg: CdcConfig = CdcConfig(),
    clamp_index: Optional[int] = None,
    sequence=None,
) -> CdcResult:
    """Factor a transmission series into betas and an unscaled depthmap.

    ``T`` is a :class:`TransmissionSeries` or an ``(n_times, ...)`` array.
    The pinned index is, in order of preference, ``clamp_index``, the image
    of ``sequence`` with the largest pixel sum, or the time with the largest
    mean optical thickness.
    """
    grid = T.grid if isinstance(T, TransmissionSeries) else None
    vals = T.values if isinstance(T, TransmissionSeries) else np.asarray(T, dtype=np.float64)
    n = vals.shape[0]
    spatial = vals.shape[1:]
    L = optical_thickness(vals, cfg.t_min).reshape(n, -1)
    if np.all(vals <= cfg.t_min):
        raise AllOpaque("every transmittance is at or below t_min")
    if clamp_index is None:
        if sequence is not None:
            imgs = np.asarray(getattr(sequence, "images", sequence))
            clamp_index = int(np.argmax(imgs.reshape(imgs.shape[0], -1).sum(axis=1)))
        else:
            clamp_index = int(np.argmax(L.mean(axis=1)))

    beta = np.full(n, cfg.init)
    beta[clamp_index] = 1.0
    z = np.full(L.shape[1], cfg.init)
    trace = [cdc_objective(beta, z, L)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        old = beta.copy()
        zz = z @ z
        if zz > 0:
            beta = np.clip(L @ z / zz, 0.0, 1.0)
        beta[clamp_index] = 1.0
        z = np.maximum(beta @ L / (beta @ beta), 0.0)
        trace.append(cdc_objective(beta, z, L))
        if np.abs(beta - old).max() < cfg.tol:
            converged = True
            break
    return CdcResult(
        scatter=ScatterSeries(beta, clamp_index),
        depth=DepthMap(z.reshape(spatial), "unscaled", grid),
        objective_trace=np.asarray(trace),
        iterations=it,
        converged=converged,
    )


def scattering_error(est, truth) -> float:
    """Root-sum-square difference after rescaling both series to unit maximum."""
    e = est.betas if isinstance(est, ScatterSeries) else np.asarray(est, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if e.shape != t.shape:
        raise LengthMismatch(f"{e.shape} vs {t.shape}")
    d = rescale_max(t) - rescale_max(e)
    return float(np.sqrt((d * d).sum()))
