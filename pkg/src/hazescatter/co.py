"""Colour Optimization: temporal transmittance and radiance by alternating least squares.

Per patch ``x`` the solver minimises

    sum_i sum_px sum_c [I_i - A_i - (R - A_i) T_i]^2

over one transmittance ``T_i`` per time and one radiance ``R`` per pixel and
channel, alternating the closed-form minimisers of each block.  Patches are
independent problems; they are solved together as a batch but each stops on
its own tolerance, so the result does not depend on batching or on the
number of worker processes.

The scale of ``T`` is fixed by pinning the darkest image's transmittance to
one whenever a single airlight is shared by all images.  With per-time
airlights the model already determines the scale and no pin is applied
unless requested.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .core import ImageSequence, PatchGrid, Rect, TransmissionSeries, make_patch_grid, patch_mean
from .errors import InvalidAirlight, InvalidImage, ZeroForeground


@dataclass(frozen=True)
class CoConfig:
    patch_size: int = 10
    tol: float = 1e-5
    max_iters: int = 500
    init_T: float = 0.0
    airlight_mode: str = "brightest"  # brightest | percentile | explicit
    percentile: float = 0.0
    clamp: str = "auto"  # auto | darkest | none

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.airlight_mode not in ("brightest", "percentile", "explicit"):
            raise ValueError(f"unknown airlight mode {self.airlight_mode!r}")
        if self.clamp not in ("auto", "darkest", "none"):
            raise ValueError(f"unknown clamp rule {self.clamp!r}")


@dataclass(frozen=True)
class CoResult:
    transmission: TransmissionSeries  # values (n_times, n_patches)
    radiance: np.ndarray  # (H, W, 3)
    objective_trace: np.ndarray
    iterations: np.ndarray  # per patch
    converged: bool
    airlight: np.ndarray  # (n_times, 3) as used


def estimate_airlight_brightest(seq, percentile: float = 0.0) -> float:
    """Global airlight from the brightest irradiance in the whole sequence.

    ``percentile`` > 0 averages the top fraction of all values instead of
    taking the single maximum.
    """
    vals = np.asarray(seq.images if isinstance(seq, ImageSequence) else seq, dtype=np.float64).ravel()
    if percentile <= 0:
        return float(vals.max())
    k = max(1, int(np.ceil(percentile * vals.size)))
    top = np.partition(vals, vals.size - k)[vals.size - k :]
    return float(top.mean())


def normalize_illumination(seq: ImageSequence, foreground: Rect) -> ImageSequence:
    """Divide each image by the mean luminance of a foreground patch."""
    out = []
    for img in seq.images:
        m = float(patch_mean(img, foreground).mean())
        if m <= 0:
            raise ZeroForeground(f"foreground mean {m} is not positive")
        out.append(img / m)
    return ImageSequence.from_images(out, airlight=seq.airlight, shutter=seq.shutter, times=seq.times)


def darkest_index(seq) -> int:
    """Image with the smallest total pixel sum; first on ties."""
    imgs = np.asarray(seq.images if isinstance(seq, ImageSequence) else seq)
    return int(np.argmin(imgs.reshape(imgs.shape[0], -1).sum(axis=1)))


def brightest_index(seq) -> int:
    imgs = np.asarray(seq.images if isinstance(seq, ImageSequence) else seq)
    return int(np.argmax(imgs.reshape(imgs.shape[0], -1).sum(axis=1)))


def _airlight_table(A, n_times: int) -> np.ndarray:
    """Broadcast an airlight to ``(n_times, 3)``.

    Accepts a scalar, a per-time vector, a per-channel row (``(3,)`` when
    ``n_times != 3``, or ``(1, 3)``) or a full table.  A length-``n_times``
    vector is always read per time.
    """
    a = np.asarray(A, dtype=np.float64)
    if a.ndim == 0:
        return np.full((n_times, 3), float(a))
    if a.ndim == 1 and a.shape[0] == n_times:
        return np.repeat(a[:, None], 3, axis=1)
    if a.shape in ((3,), (1, 3)):
        return np.broadcast_to(a.reshape(3), (n_times, 3)).copy()
    if a.shape == (n_times, 3):
        return a.copy()
    raise InvalidAirlight(f"cannot interpret airlight of shape {a.shape} for {n_times} images")


def _stack_patches(images: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """(N, H, W, 3) -> (P, N, M) with M = pixels*channels per patch."""
    per_time = [grid.to_patches(img).reshape(grid.n_patches, -1) for img in images]
    return np.ascontiguousarray(np.stack(per_time, axis=1))


def _objective(Y, Rm, T):
    # Y = I - A, Rm = R - A  (both (P, N, M)); T (P, N)
    r = Y - Rm * T[:, :, None]
    return (r * r).sum(axis=(1, 2))


def _solve_patches(I, A, clamp, T0, R0, tol, max_iters):
    """Alternating updates on a batch of patches.

    I: (P, N, M); A: (N, M); T0: (P, N); R0: (P, M).
    Returns T, R, per-iteration per-patch objectives (iters, P), iteration
    counts and whether every patch converged.  Finished patches carry their
    last objective forward.
    """
    P, N, M = I.shape
    Y = I - A[None]
    T = np.clip(T0, 0.0, 1.0).copy()
    R = np.clip(R0, 0.0, 1.0).copy()
    iters = np.zeros(P, dtype=int)
    active = np.ones(P, dtype=bool)
    per_patch_obj = _objective(Y, R[:, None, :] - A[None], T)
    trace = [per_patch_obj.copy()]
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ya, Ra, Ta = Y[idx], R[idx], T[idx]
        # T step: T_i = sum (I-A)(R-A) / sum (R-A)^2, exact 1-D minimiser per time.
        Rm = Ra[:, None, :] - A[None]
        num = (Ya * Rm).sum(axis=2)
        den = (Rm * Rm).sum(axis=2)
        Tn = np.where(den > 0, num / np.where(den > 0, den, 1.0), Ta)
        Tn = np.clip(Tn, 0.0, 1.0)
        if clamp is not None:
            Tn[:, clamp] = 1.0
        # R step: R = sum_i T_i (I_i - A_i + A_i T_i) / sum_i T_i^2.
        t3 = Tn[:, :, None]
        tt = (Tn * Tn).sum(axis=1)[:, None]
        Rn = np.where(tt > 0, (t3 * (Ya + A[None] * t3)).sum(axis=1) / np.where(tt > 0, tt, 1.0), Ra)
        Rn = np.clip(Rn, 0.0, 1.0)
        delta = np.abs(Tn - Ta).max(axis=1)
        T[idx], R[idx] = Tn, Rn
        iters[idx] += 1
        per_patch_obj[idx] = _objective(Ya, Rn[:, None, :] - A[None], Tn)
        trace.append(per_patch_obj.copy())
        active[idx[delta < tol]] = False
    return T, R, np.asarray(trace), iters, not active.any()


def _solve_chunk(args):
    return _solve_patches(*args)


def _pad_rows(h: np.ndarray, n: int) -> np.ndarray:
    if h.shape[0] == n:
        return h
    return np.vstack([h, np.repeat(h[-1:], n - h.shape[0], axis=0)])


def co_solve(seq: ImageSequence, A, cfg: CoConfig = CoConfig(), grid: Optional[PatchGrid] = None,
             clamp_index: Optional[int] = None, jobs: int = 1) -> CoResult:
    """Estimate per-patch transmittance series and scene radiance.

    ``A`` is a scalar, a per-channel triple, a per-time vector or an
    ``(n_times, 3)`` table.  ``cfg.clamp`` selects the pin: ``"auto"`` pins
    the darkest image only for a time-constant airlight.  The objective trace
    has one entry per sweep plus the initial value.  Non-convergence within
    ``max_iters`` is reported via ``converged=False``.
    """
    images = np.asarray(seq.images)
    n, h, w, _ = images.shape
    if n < 2:
        raise InvalidImage("colour optimization needs at least two images")
    grid = grid or make_patch_grid(h, w, cfg.patch_size)
    A_tab = _airlight_table(A, n)
    if clamp_index is not None:
        clamp = int(clamp_index)
    elif cfg.clamp == "darkest" or (cfg.clamp == "auto" and np.all(A_tab == A_tab[0])):
        clamp = darkest_index(images)
    else:
        # Time-varying airlight removes the scale ambiguity; pinning would bias T.
        clamp = None
    I = _stack_patches(images, grid)
    npx = grid.patch_height * grid.patch_width
    A_full = np.repeat(A_tab[:, None, :], npx, axis=1).reshape(n, -1)
    P, M = grid.n_patches, I.shape[2]
    T0, R0 = np.full((P, n), cfg.init_T), np.zeros((P, M))
    if jobs > 1 and P > 1:
        from concurrent.futures import ProcessPoolExecutor

        bounds = np.linspace(0, P, min(jobs, P) + 1).astype(int)
        parts = [(I[a:b], A_full, clamp, T0[a:b], R0[a:b], cfg.tol, cfg.max_iters) for a, b in zip(bounds, bounds[1:])]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_solve_chunk, parts))
        T = np.concatenate([o[0] for o in outs])
        R = np.concatenate([o[1] for o in outs])
        n_rows = max(o[2].shape[0] for o in outs)
        hist = np.hstack([_pad_rows(o[2], n_rows) for o in outs])
        iters = np.concatenate([o[3] for o in outs])
        ok = all(o[4] for o in outs)
    else:
        T, R, hist, iters, ok = _solve_patches(I, A_full, clamp, T0, R0, cfg.tol, cfg.max_iters)
    trace = hist.sum(axis=1)
    radiance = grid.from_patches(R.reshape(P, npx, 3))
    return CoResult(
        transmission=TransmissionSeries(T.T, grid=grid, clamp_index=clamp),
        radiance=radiance,
        objective_trace=trace,
        iterations=iters,
        converged=bool(ok),
        airlight=A_tab,
    )


@dataclass(frozen=True)
class MultiStart:
    best: CoResult
    inits: tuple
    finals: np.ndarray  # final objective per start


def co_multistart(seq: ImageSequence, A, cfg: CoConfig = CoConfig(), inits=(0.0, 0.5, 1.0), **kw) -> MultiStart:
    """Run :func:`co_solve` from several uniform initial transmittances.

    The objective is not convex, so agreement between starts is the only
    evidence offered about global optimality; the lowest final objective wins.
    """
    runs = [co_solve(seq, A, replace(cfg, init_T=float(t0)), **kw) for t0 in inits]
    finals = np.array([r.objective_trace[-1] for r in runs])
    return MultiStart(runs[int(np.argmin(finals))], tuple(inits), finals)


def co_objective(T, R, seq: ImageSequence, A, grid: PatchGrid) -> float:
    """Total least-squares objective for ``T`` (n_times, P) and ``R`` (H, W, 3)."""
    images = np.asarray(seq.images)
    n = images.shape[0]
    I = _stack_patches(images, grid)
    npx = grid.patch_height * grid.patch_width
    A_full = np.repeat(_airlight_table(A, n)[:, None, :], npx, axis=1).reshape(n, -1)
    Rp = grid.to_patches(np.asarray(R, dtype=np.float64)).reshape(grid.n_patches, -1)
    return float(_objective(I - A_full[None], Rp[:, None, :] - A_full[None], np.asarray(T, float).T).sum())


def co_gradients(T, R, seq: ImageSequence, A, grid: PatchGrid) -> tuple[np.ndarray, np.ndarray]:
    """Exact partial derivatives of :func:`co_objective`.

    Returns ``dT`` shaped like ``T`` (n_times, P) and ``dR`` shaped like
    ``R`` (H, W, 3).
    """
    images = np.asarray(seq.images)
    n = images.shape[0]
    I = _stack_patches(images, grid)
    npx = grid.patch_height * grid.patch_width
    A_full = np.repeat(_airlight_table(A, n)[:, None, :], npx, axis=1).reshape(n, -1)
    Rp = grid.to_patches(np.asarray(R, dtype=np.float64)).reshape(grid.n_patches, -1)
    Tp = np.asarray(T, dtype=np.float64).T
    Rm = Rp[:, None, :] - A_full[None]
    resid = I - A_full[None] - Rm * Tp[:, :, None]
    dT = -2.0 * (resid * Rm).sum(axis=2)
    dR = -2.0 * (resid * Tp[:, :, None]).sum(axis=1)
    return dT.T, grid.from_patches(dR.reshape(grid.n_patches, npx, 3))


def resolve_airlight(seq: ImageSequence, cfg: CoConfig, explicit=None):
    if cfg.airlight_mode == "explicit":
        if explicit is None:
            if seq.airlight is None:
                raise InvalidAirlight("explicit airlight mode needs airlight values")
            explicit = seq.airlight
        return np.asarray(explicit, dtype=np.float64)
    pct = cfg.percentile if cfg.airlight_mode == "percentile" else 0.0
    return estimate_airlight_brightest(seq, pct)
