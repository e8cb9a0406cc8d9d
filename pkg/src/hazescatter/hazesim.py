"""Synthetic hazy scenes with known ground truth.

The formation model is ``I = R exp(-beta z) + A (1 - exp(-beta z))`` applied
per depth patch, plus optional unclamped Gaussian noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import ImageSequence, PatchGrid, derive_rng, make_patch_grid
from .errors import InvalidUnitVector, InvalidImage

# Default simulation protocol: five times with rising haze.
PROTOCOL_BETAS = (0.1, 0.15, 0.2, 0.25, 0.3)
PROTOCOL_AIRLIGHTS = (0.5, 0.6, 0.7, 0.8, 0.9)
PROTOCOL_DEPTH_RANGE = (1.0, 20.0)

# Two-weather dichromatic scene.
TWO_WEATHER_HORIZON = (200.0, 400.0)
TWO_WEATHER_BETAS = (1.0, 1.5)
TWO_WEATHER_DEPTH_RANGE = (3.0, 4.5)
TWO_WEATHER_AIRLIGHT_RGB = (20.0, 30.0, 50.0)


@dataclass(frozen=True)
class DepthRange:
    """Depth specification by range.

    ``layout="bands"`` assigns ``max(rows, cols)`` evenly spaced depth bands
    growing right-to-left and bottom-up;
    ``layout="uniform"`` draws each patch depth uniformly from the range.
    """

    lo: float
    hi: float
    layout: str = "bands"


@dataclass(frozen=True)
class SceneTruth:
    radiance: np.ndarray  # (H, W, 3)
    depths: np.ndarray  # (n_patches,)
    grid: PatchGrid

    @property
    def depth_map(self) -> np.ndarray:
        return self.grid.expand(self.depths)


@dataclass(frozen=True)
class HazeParams:
    betas: tuple
    airlights: tuple
    noise_sigma: float = 0.0

    def __post_init__(self):
        if len(self.betas) != len(self.airlights):
            raise ValueError("betas and airlights must have equal length")
        if any(b < 0 for b in self.betas):
            raise ValueError("betas must be nonnegative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @classmethod
    def protocol(cls, noise_sigma: float = 0.0) -> "HazeParams":
        return cls(PROTOCOL_BETAS, PROTOCOL_AIRLIGHTS, noise_sigma)

    def transmissions(self, depths) -> np.ndarray:
        """Ground-truth transmittance, shape ``(n_times, n_patches)``."""
        return np.exp(-np.outer(self.betas, np.asarray(depths, dtype=np.float64)))


def band_depths(rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
    """Row-major per-patch depths, deepest at the top-left corner."""
    n_bands = max(rows, cols)
    levels = np.linspace(lo, hi, n_bands) if n_bands > 1 else np.array([lo])
    r = np.arange(rows)[:, None]
    c = np.arange(cols)[None, :]
    up = (rows - 1 - r) * (n_bands - 1) // max(rows - 1, 1)
    left = (cols - 1 - c) * (n_bands - 1) // max(cols - 1, 1)
    return levels[np.maximum(up, left)].ravel()


def random_scene(
    h: int,
    w: int,
    ps: int,
    depth_spec: Union[DepthRange, Sequence[float]] = DepthRange(*PROTOCOL_DEPTH_RANGE),
    seed: int = 0,
    colors: str = "pixel",
) -> SceneTruth:
    """Uniform random radiance and per-patch depths.

    ``colors="pixel"`` draws every pixel independently; ``colors="patch"``
    paints each patch one random colour.
    """
    grid = make_patch_grid(h, w, ps)
    rng = derive_rng(seed, 0)
    if colors == "pixel":
        radiance = rng.uniform(0.0, 1.0, size=(h, w, 3))
    elif colors == "patch":
        radiance = grid.expand(rng.uniform(0.0, 1.0, size=(grid.n_patches, 3)))
    else:
        raise ValueError(f"unknown colour mode {colors!r}")
    if isinstance(depth_spec, DepthRange):
        if depth_spec.layout == "bands":
            depths = band_depths(grid.rows, grid.cols, depth_spec.lo, depth_spec.hi)
        elif depth_spec.layout == "uniform":
            depths = derive_rng(seed, 1).uniform(depth_spec.lo, depth_spec.hi, grid.n_patches)
        else:
            raise ValueError(f"unknown depth layout {depth_spec.layout!r}")
    else:
        depths = np.asarray(depth_spec, dtype=np.float64)
        if depths.shape != (grid.n_patches,):
            raise ValueError(f"need {grid.n_patches} depths, got {depths.shape}")
    if np.any(depths <= 0):
        raise ValueError("depths must be strictly positive")
    radiance.setflags(write=False)
    depths.setflags(write=False)
    return SceneTruth(radiance, depths, grid)


def with_windows(truth: SceneTruth, patches: Sequence[int], zero_channel: int = 0) -> SceneTruth:
    """Zero one colour channel of the given patches.

    Such "window" patches have a direct-transmission colour on a face of the
    RGB cube, which the dichromatic method needs as an anchor.
    """
    radiance = np.array(truth.radiance)
    for k in patches:
        rs, cs = truth.grid.rects()[k].slices
        radiance[rs, cs, zero_channel] = 0.0
    radiance.setflags(write=False)
    return SceneTruth(radiance, truth.depths, truth.grid)


def haze_image(radiance, depth_map, beta: float, airlight) -> np.ndarray:
    """Noise-free ``R t + A (1 - t)`` with ``t = exp(-beta z)``."""
    t = np.exp(-beta * np.asarray(depth_map, dtype=np.float64))[..., None]
    return np.asarray(radiance) * t + np.asarray(airlight, dtype=np.float64) * (1.0 - t)


def simulate_haze(truth: SceneTruth, params: HazeParams, seed: int = 0) -> ImageSequence:
    z = truth.depth_map
    images = []
    for i, (beta, a) in enumerate(zip(params.betas, params.airlights)):
        img = haze_image(truth.radiance, z, beta, a)
        if params.noise_sigma > 0:
            img = img + derive_rng(seed, 100, i).normal(0.0, params.noise_sigma, img.shape)
        images.append(img)
    return ImageSequence.from_images(images, airlight=np.asarray(params.airlights, dtype=float))


def simulate_polarized_pair(
    truth: SceneTruth,
    beta: float,
    airlight,
    dop: float,
    noise_sigma: float = 0.0,
    seed: int = 0,
    time_index: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Best (parallel) and worst (perpendicular) polarizer images.

    Direct transmission splits evenly between the two orientations; the
    airlight splits as ``(1 -+ p) / 2``.
    """
    if not 0.0 <= dop <= 1.0:
        raise ValueError("degree of polarization must lie in [0, 1]")
    t = np.exp(-beta * truth.depth_map)[..., None]
    direct = truth.radiance * t
    air = np.asarray(airlight, dtype=np.float64) * (1.0 - t)
    best = direct / 2 + air * (1.0 - dop) / 2
    worst = direct / 2 + air * (1.0 + dop) / 2
    if noise_sigma > 0:
        best = best + derive_rng(seed, 200, time_index, 0).normal(0.0, noise_sigma, best.shape)
        worst = worst + derive_rng(seed, 200, time_index, 1).normal(0.0, noise_sigma, worst.shape)
    return best, worst


def unit_rgb(rgb) -> np.ndarray:
    v = np.asarray(rgb, dtype=np.float64)
    n = np.linalg.norm(v)
    if v.shape != (3,) or n == 0:
        raise InvalidUnitVector("airlight direction must be a nonzero RGB vector")
    return v / n


def simulate_two_weather(
    truth: SceneTruth,
    weather1: tuple[float, float],
    weather2: tuple[float, float],
    airlight_dir,
    use_inverse_square: bool = False,
    noise_sigma: float = 0.0,
    seed: int = 0,
    time_index: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Scene colours under two weather conditions, ``E = p D + q A_hat``.

    ``weather`` is ``(beta, a_inf)``; ``p = a_inf R exp(-beta z) [/ z^2]`` and
    ``q = a_inf (1 - exp(-beta z))`` with ``a_inf`` the horizon magnitude
    along the unit airlight direction.
    """
    a_hat = np.asarray(airlight_dir, dtype=np.float64)
    if a_hat.shape != (3,) or abs(np.linalg.norm(a_hat) - 1.0) > 1e-9 or np.any(a_hat <= 0):
        raise InvalidUnitVector("airlight direction must be a unit vector with positive components")
    z = truth.depth_map[..., None]
    out = []
    for k, (beta, a_inf) in enumerate((weather1, weather2)):
        p = a_inf * np.exp(-beta * z)
        if use_inverse_square:
            p = p / z**2
        q = a_inf * (1.0 - np.exp(-beta * z))
        e = truth.radiance * p + q * a_hat
        if noise_sigma > 0:
            e = e + derive_rng(seed, 300, time_index, k).normal(0.0, noise_sigma, e.shape)
        out.append(e)
    return out[0], out[1]


def two_weather_scene(seed: int = 0, size: int = 200, patch: int = 50, windows: Sequence[int] = ()) -> SceneTruth:
    """Sixteen-patch scene with depths uniform in [3, 4.5]."""
    if size % patch:
        raise InvalidImage("patch must divide size")
    truth = random_scene(size, size, patch, DepthRange(*TWO_WEATHER_DEPTH_RANGE, layout="uniform"), seed)
    return with_windows(truth, windows) if windows else truth


def two_weather_pair(
    seed: int = 0, use_inverse_square: bool = True, noise_sigma: float = 0.0, windows: Sequence[int] = (0,)
) -> tuple[SceneTruth, np.ndarray, np.ndarray, np.ndarray]:
    truth = two_weather_scene(seed, windows=windows)
    a_hat = unit_rgb(TWO_WEATHER_AIRLIGHT_RGB)
    e1, e2 = simulate_two_weather(
        truth,
        (TWO_WEATHER_BETAS[0], TWO_WEATHER_HORIZON[0]),
        (TWO_WEATHER_BETAS[1], TWO_WEATHER_HORIZON[1]),
        a_hat,
        use_inverse_square=use_inverse_square,
        noise_sigma=noise_sigma,
        seed=seed,
    )
    return truth, e1, e2, a_hat


def simulate_dichromatic_sequence(
    truth: SceneTruth,
    betas: Sequence[float],
    horizons: Sequence[float],
    airlight_dir,
    use_inverse_square: bool = False,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Images ``E_i = p_i D_hat + q_i A_hat`` for several weather states.

    Consecutive images form the two-weather pairs; each image carries one
    noise realization shared by the pairs it belongs to.
    """
    a_hat = np.asarray(airlight_dir, dtype=np.float64)
    if a_hat.shape != (3,) or abs(np.linalg.norm(a_hat) - 1.0) > 1e-9 or np.any(a_hat <= 0):
        raise InvalidUnitVector("airlight direction must be a unit vector with positive components")
    if len(betas) != len(horizons):
        raise ValueError("betas and horizons must have equal length")
    z = truth.depth_map[..., None]
    out = []
    for i, (beta, a_inf) in enumerate(zip(betas, horizons)):
        p = a_inf * np.exp(-beta * z)
        if use_inverse_square:
            p = p / z**2
        e = truth.radiance * p + a_inf * (1.0 - np.exp(-beta * z)) * a_hat
        if noise_sigma > 0:
            e = e + derive_rng(seed, 400, i).normal(0.0, noise_sigma, e.shape)
        out.append(e)
    return np.stack(out)
