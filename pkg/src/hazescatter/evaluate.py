"""Error metrics and statistics for comparing estimates with ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import Rect
from .errors import DegenerateSample, ShapeMismatch, ZeroNearDepth


def _pair(est, truth) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(getattr(est, "values", est), dtype=np.float64)
    t = np.asarray(getattr(truth, "values", truth), dtype=np.float64)
    if e.shape != t.shape:
        raise ShapeMismatch(f"{e.shape} vs {t.shape}")
    return e, t


def depth_error(est, truth) -> float:
    """Root of the summed squared differences over every location."""
    e, t = _pair(est, truth)
    d = t - e
    return float(np.sqrt((d * d).sum()))


def depth_rms(est, truth) -> float:
    """Per-location root mean square, the size-independent companion of :func:`depth_error`."""
    e, t = _pair(est, truth)
    d = t - e
    return float(np.sqrt((d * d).mean()))


def rescaled_depth_error(est, truth) -> tuple[float, float]:
    """(verbatim, rms) errors after dividing each map by its own maximum."""
    e, t = _pair(est, truth)
    e = e / e.max() if e.max() > 0 else e
    t = t / t.max() if t.max() > 0 else t
    return depth_error(e, t), depth_rms(e, t)


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    dof: float
    p_two_tail: float
    p_one_tail: float


def welch_from_stats(mean_a, var_a, n_a, mean_b, var_b, n_b) -> WelchResult:
    """Unequal-variance two-sample t test from summary statistics."""
    if n_a < 2 or n_b < 2:
        raise DegenerateSample("each sample needs at least two values")
    va, vb = var_a / n_a, var_b / n_b
    se2 = va + vb
    if not np.isfinite(se2):
        raise DegenerateSample("sample variance is undefined")
    if se2 == 0:
        if mean_a == mean_b:
            return WelchResult(0.0, float(n_a + n_b - 2), 1.0, 0.5)
        raise DegenerateSample("both samples have zero variance")
    t = (mean_a - mean_b) / np.sqrt(se2)
    dof = se2 * se2 / (va * va / (n_a - 1) + vb * vb / (n_b - 1))
    p_one = float(stats.t.sf(abs(t), dof))
    return WelchResult(float(t), float(dof), min(1.0, 2.0 * p_one), p_one)


def welch_t_test(a, b) -> WelchResult:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise DegenerateSample("each sample needs at least two values")
    return welch_from_stats(a.mean(), a.var(ddof=1), a.size, b.mean(), b.var(ddof=1), b.size)


def distance_ratio(depth, far: Rect, near: Rect) -> float:
    """Mean depth over ``far`` divided by mean depth over ``near``."""
    d = np.asarray(getattr(depth, "values", depth), dtype=np.float64)
    for r in (far, near):
        r.check(d.shape[0], d.shape[1])
    mf = float(d[far.slices].mean())
    mn = float(d[near.slices].mean())
    if mn == 0:
        raise ZeroNearDepth("near region has zero mean depth")
    return mf / mn
