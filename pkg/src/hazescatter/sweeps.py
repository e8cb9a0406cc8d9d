"""Monte Carlo experiments: algorithm-plus-CDC pipelines under injected errors.

Each trial draws a fresh random scene from a seed derived from
``(master seed, grid index, trial index)``, so results do not depend on the
number of worker processes or on execution order.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cdc import CdcConfig, cdc_solve, scattering_error
from .co import CoConfig, brightest_index, co_solve, estimate_airlight_brightest
from .core import derive_rng, make_patch_grid
from .dehaze_dark import WindowSpec, dark_channel, dehaze_dc, estimate_airlight_dc
from .dehaze_dichromatic import dichromatic_pipeline
from .dehaze_pol import PolEstimate, dehaze_pol
from .errors import HazeError
from .evaluate import depth_error, rescaled_depth_error
from .hazesim import (
    PROTOCOL_AIRLIGHTS,
    PROTOCOL_BETAS,
    PROTOCOL_DEPTH_RANGE,
    DepthRange,
    HazeParams,
    SceneTruth,
    random_scene,
    simulate_dichromatic_sequence,
    simulate_haze,
    simulate_polarized_pair,
    with_windows,
)

ALGORITHMS = ("CO-CDC", "POL-CDC", "DICH-CDC", "DC-CDC")
VARIABLES = ("image_noise", "dop_error", "airlight_error")

# The dichromatic pipeline needs one image more than the others; the extra
# weather state continues the arithmetic progressions of the protocol.
DICH_EXTRA_BETA = 0.35
DICH_EXTRA_AIRLIGHT = 1.0
GRAY = np.full(3, 1.0 / math.sqrt(3.0))


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "image_noise"
    values: tuple = (0.0, 0.05, 0.1, 0.15, 0.2)
    trials: int = 20
    seed: int = 0
    algorithms: tuple = ALGORITHMS
    base_noise: float = 0.0  # image noise when another variable is swept
    dop: float = 1.0  # true degree of polarization
    size: int = 100
    patch: int = 10
    betas: tuple = PROTOCOL_BETAS
    airlights: tuple = PROTOCOL_AIRLIGHTS
    depth_range: tuple = PROTOCOL_DEPTH_RANGE
    window_patches: tuple = (0,)  # patches given a zero channel (dichromatic anchors)
    co_airlight: str = "explicit"  # explicit | brightest
    colors: str = "pixel"  # pixel | patch, see random_scene
    dc_airlight: str = "native"  # native (dark-channel estimate) | true
    cdc_tol: float = 1e-10  # tight enough that exact inputs give exact betas
    cdc_max_iters: int = 5000

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.values:
            raise ValueError("sweep grid is empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        if self.co_airlight not in ("explicit", "brightest"):
            raise ValueError(f"unknown co_airlight {self.co_airlight!r}")
        if self.dc_airlight not in ("native", "true"):
            raise ValueError(f"unknown dc_airlight {self.dc_airlight!r}")

    def conditions(self, value: float) -> tuple[float, float, float]:
        """(noise sigma, DOP error, airlight error) for one grid value."""
        noise = value if self.variable == "image_noise" else self.base_noise
        dop_err = value if self.variable == "dop_error" else 0.0
        air_err = value if self.variable == "airlight_error" else 0.0
        return noise, dop_err, air_err


@dataclass(frozen=True)
class TrialOutcome:
    scatter: float
    depth: float
    depth_rms: float


def trial_seed(seed: int, grid_index: int, trial: int) -> int:
    return int(derive_rng(seed, grid_index, trial).integers(0, 2**63 - 1))


def make_truth(spec: SweepSpec, seed: int) -> SceneTruth:
    truth = random_scene(spec.size, spec.size, spec.patch, DepthRange(*spec.depth_range), seed, spec.colors)
    return with_windows(truth, spec.window_patches) if spec.window_patches else truth


def _patch_T(grid, optical_depth_maps) -> np.ndarray:
    """Per-patch transmittance: the mean of ``exp(-depth)`` over each patch's valid pixels."""
    T = np.stack([np.nanmean(np.exp(-grid.to_patches(np.asarray(m))), axis=1) for m in optical_depth_maps])
    if np.any(~np.isfinite(T)):
        raise HazeError("a patch has no valid optical depth")
    return T


def _cdc_cfg(spec: SweepSpec) -> CdcConfig:
    return CdcConfig(tol=spec.cdc_tol, max_iters=spec.cdc_max_iters)


def _outcome(spec: SweepSpec, truth: SceneTruth, cdc) -> TrialOutcome:
    err = scattering_error(cdc.scatter, spec.betas)
    d, rms = rescaled_depth_error(cdc.depth.values, truth.depths)
    return TrialOutcome(err, d, rms)


def run_co_cdc(spec, truth, noise, dop_err, air_err, seed) -> TrialOutcome:
    seq = simulate_haze(truth, HazeParams(spec.betas, spec.airlights, noise), seed)
    if spec.co_airlight == "explicit":
        A = np.asarray(spec.airlights) * (1.0 + air_err)
    else:
        A = estimate_airlight_brightest(seq) * (1.0 + air_err)
    co = co_solve(seq, A, CoConfig(patch_size=spec.patch), grid=truth.grid)
    return _outcome(spec, truth, cdc_solve(co.transmission, _cdc_cfg(spec), sequence=seq))


def run_pol_cdc(spec, truth, noise, dop_err, air_err, seed) -> TrialOutcome:
    depths, totals = [], []
    for i, (beta, a) in enumerate(zip(spec.betas, spec.airlights)):
        best, worst = simulate_polarized_pair(truth, beta, a, spec.dop, noise, seed, i)
        est = PolEstimate.exact(spec.dop * (1.0 - dop_err), a * (1.0 + air_err))
        depths.append(dehaze_pol(best, worst, est).scaled_depth)
        totals.append(best + worst)
    T = _patch_T(truth.grid, depths)
    return _outcome(spec, truth, cdc_solve(T, _cdc_cfg(spec), clamp_index=brightest_index(np.stack(totals))))


def run_dc_cdc(spec, truth, noise, dop_err, air_err, seed) -> TrialOutcome:
    seq = simulate_haze(truth, HazeParams(spec.betas, spec.airlights, noise), seed)
    win = WindowSpec(spec.patch, spec.patch, "tiled")
    depths = []
    for img, a_true in zip(seq.images, spec.airlights):
        if spec.dc_airlight == "native":
            A = estimate_airlight_dc(img, dark_channel(img, win))
        else:
            A = np.full(3, a_true)
        depths.append(dehaze_dc(img, win, A * (1.0 + air_err)).scaled_depth)
    T = _patch_T(truth.grid, depths)
    return _outcome(spec, truth, cdc_solve(T, _cdc_cfg(spec), sequence=seq))


def run_dich_cdc(spec, truth, noise, dop_err, air_err, seed) -> TrialOutcome:
    betas = tuple(spec.betas) + (DICH_EXTRA_BETA,)
    # Horizon magnitude along the gray direction giving per-channel airlight A.
    horizons = np.sqrt(3.0) * np.asarray(tuple(spec.airlights) + (DICH_EXTRA_AIRLIGHT,))
    imgs = simulate_dichromatic_sequence(truth, betas, horizons, GRAY, noise_sigma=noise, seed=seed)
    depths = [
        dichromatic_pipeline(imgs[i], imgs[i + 1], horizon_scale=1.0 + air_err).result.beta1_depth
        for i in range(len(spec.betas))
    ]
    T = _patch_T(truth.grid, depths)
    return _outcome(spec, truth, cdc_solve(T, _cdc_cfg(spec), clamp_index=brightest_index(imgs[:-1])))


PIPELINES = {
    "CO-CDC": run_co_cdc,
    "POL-CDC": run_pol_cdc,
    "DICH-CDC": run_dich_cdc,
    "DC-CDC": run_dc_cdc,
}


def run_trial(spec: SweepSpec, grid_index: int, trial: int) -> dict:
    """All algorithms on one scene; failures are recorded as NaN."""
    seed = trial_seed(spec.seed, grid_index, trial)
    truth = make_truth(spec, seed)
    noise, dop_err, air_err = spec.conditions(spec.values[grid_index])
    out = {}
    for alg in spec.algorithms:
        try:
            out[alg] = PIPELINES[alg](spec, truth, noise, dop_err, air_err, seed)
        except (HazeError, FloatingPointError, np.linalg.LinAlgError):
            out[alg] = None
    return out


def _run_task(args):
    return run_trial(*args)


@dataclass
class SweepResult:
    spec: SweepSpec
    scatter: np.ndarray  # (n_values, n_algorithms, trials), NaN for failed trials
    depth: np.ndarray
    depth_rms: np.ndarray

    @property
    def failures(self) -> np.ndarray:
        return np.isnan(self.scatter).sum(axis=2)

    def mean(self, metric: str = "scatter") -> np.ndarray:
        a = getattr(self, metric)
        with np.errstate(invalid="ignore"):
            n = (~np.isnan(a)).sum(axis=2)
            s = np.where(np.isnan(a), 0.0, a).sum(axis=2)
            return np.where(n > 0, s / np.maximum(n, 1), np.nan)

    def std(self, metric: str = "scatter") -> np.ndarray:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanstd(getattr(self, metric), axis=2)

    def series(self, algorithm: str, metric: str = "scatter") -> np.ndarray:
        return self.mean(metric)[:, self.spec.algorithms.index(algorithm)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "value", "algorithm", "trial", "error", "depth_error", "depth_rms"])
            for g, v in enumerate(self.spec.values):
                for a, alg in enumerate(self.spec.algorithms):
                    for k in range(self.spec.trials):
                        w.writerow([self.spec.variable, fmt(v), alg, k, fmt(self.scatter[g, a, k]),
                                    fmt(self.depth[g, a, k]), fmt(self.depth_rms[g, a, k])])

    def write_summary_csv(self, path) -> None:
        mean, std = self.mean(), self.std()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value"] + [f"{alg}_{s}" for alg in self.spec.algorithms for s in ("mean", "std")])
            for g, v in enumerate(self.spec.values):
                row = [fmt(v)]
                for a in range(len(self.spec.algorithms)):
                    row += [fmt(mean[g, a]), fmt(std[g, a])]
                w.writerow(row)

    def summary(self) -> dict:
        mean, fails = self.mean(), self.failures
        dmean = self.mean("depth")
        return {
            "spec": asdict(self.spec),
            "algorithms": {
                alg: {
                    "mean_error": [float(x) for x in mean[:, a]],
                    "mean_depth_error": [float(x) for x in dmean[:, a]],
                    "failed_trials": [int(x) for x in fails[:, a]],
                }
                for a, alg in enumerate(self.spec.algorithms)
            },
        }


def fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else repr(float(x))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    tasks = [(spec, g, k) for g in range(len(spec.values)) for k in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outcomes = [run_trial(*t) for t in tasks]
    shape = (len(spec.values), len(spec.algorithms), spec.trials)
    arrays = {m: np.full(shape, np.nan) for m in ("scatter", "depth", "depth_rms")}
    for (_, g, k), out in zip(tasks, outcomes):
        for a, alg in enumerate(spec.algorithms):
            o = out[alg]
            if o is not None:
                arrays["scatter"][g, a, k] = o.scatter
                arrays["depth"][g, a, k] = o.depth
                arrays["depth_rms"][g, a, k] = o.depth_rms
    return SweepResult(spec, **arrays)


def noise_sweep(values=(0.0, 0.05, 0.1, 0.15, 0.2), **kw) -> SweepResult:
    jobs = kw.pop("jobs", 1)
    return run_sweep(SweepSpec("image_noise", tuple(values), **kw), jobs)


def dop_sweep(values=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5), **kw) -> SweepResult:
    jobs = kw.pop("jobs", 1)
    return run_sweep(SweepSpec("dop_error", tuple(values), **kw), jobs)


def airlight_error_sweep(values=(0.0, 0.05, 0.1, 0.15, 0.2), **kw) -> SweepResult:
    jobs = kw.pop("jobs", 1)
    return run_sweep(SweepSpec("airlight_error", tuple(values), **kw), jobs)


# Transmittance-accuracy table -------------------------------------------------

TRANSMITTANCE_LEVELS = tuple(round(0.1 * k, 1) for k in range(1, 10))
TRANSMITTANCE_NOISE = (0.0, 0.01, 0.05, 0.1)


@dataclass(frozen=True)
class TransmittanceSpec:
    """Colour Optimization on uniform-transmittance scenes.

    Every patch of a ``size`` x ``size`` scene sits at the depth giving
    transmittance ``level`` in image ``ref_time``.  The sequence uses unit
    airlight in every image, Colour Optimization is given that airlight
    exactly and runs without the darkest-image pin, and the error is the
    root-sum-square difference between the estimated and actual per-pixel
    transmittance maps of image ``ref_time``.
    """

    levels: tuple = TRANSMITTANCE_LEVELS
    noise: tuple = TRANSMITTANCE_NOISE
    trials: int = 20
    seed: int = 0
    size: int = 40
    patch: int = 10
    betas: tuple = PROTOCOL_BETAS
    ref_time: int = 0


def transmittance_trial(spec: TransmittanceSpec, level_index: int, sigma: float, trial: int) -> float:
    level = spec.levels[level_index]
    seed = trial_seed(spec.seed, level_index, trial)
    z = -math.log(level) / spec.betas[spec.ref_time]
    grid = make_patch_grid(spec.size, spec.size, spec.patch)
    truth = random_scene(spec.size, spec.size, spec.patch, [z] * grid.n_patches, seed)
    params = HazeParams(spec.betas, (1.0,) * len(spec.betas), sigma)
    seq = simulate_haze(truth, params, seed)
    co = co_solve(seq, 1.0, CoConfig(patch_size=spec.patch, clamp="none"), grid=grid)
    est = grid.expand(co.transmission.values[spec.ref_time])
    actual = grid.expand(params.transmissions(truth.depths)[spec.ref_time])
    return depth_error(est, actual)


def _transmittance_task(args):
    return transmittance_trial(*args)


def transmittance_table(spec: TransmittanceSpec = TransmittanceSpec(), jobs: int = 1) -> np.ndarray:
    """Mean error per (level, noise), shape ``(len(levels), len(noise))``."""
    tasks = [(spec, li, s, k) for li in range(len(spec.levels)) for s in spec.noise for k in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            errs = list(ex.map(_transmittance_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        errs = [transmittance_trial(*t) for t in tasks]
    return np.asarray(errs).reshape(len(spec.levels), len(spec.noise), spec.trials).mean(axis=2)
