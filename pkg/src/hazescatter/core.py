"""Image containers, patch grids and shared numeric helpers.

Images are plain ``numpy`` arrays of shape ``(H, W, 3)`` holding linear
irradiance.  :func:`linear_image` validates and freezes them; the rest of the
package accepts anything array-like and calls it on entry.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidImage, NonDivisiblePatch, OutOfBounds

T_MIN = 1e-20


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def linear_image(data, copy: bool = True) -> np.ndarray:
    """Validate ``data`` as an H x W x 3 linear-irradiance image.

    Integer arrays are scaled by the maximum code value of their dtype
    (255 for 8-bit, 65535 for 16-bit).  The returned array is float64 and
    read-only.
    """
    arr = np.asarray(data)
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.float64) / float(np.iinfo(arr.dtype).max)
    else:
        arr = np.array(arr, dtype=np.float64, copy=copy)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidImage(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidImage("image must be at least 1x1")
    if not np.all(np.isfinite(arr)):
        raise InvalidImage("image contains non-finite values")
    return _freeze(arr)


@dataclass(frozen=True)
class Rect:
    """Zero-based, half-open pixel rectangle ``[r0, r1) x [c0, c1)``."""

    r0: int
    r1: int
    c0: int
    c1: int

    @classmethod
    def parse(cls, text: str) -> "Rect":
        r0, r1, c0, c1 = (int(v) for v in text.split(","))
        return cls(r0, r1, c0, c1)

    @classmethod
    def from_inclusive(cls, r0: int, r1: int, c0: int, c1: int) -> "Rect":
        """Build from 1-based inclusive coordinates (the convention of the patch coordinate tables)."""
        return cls(r0 - 1, r1, c0 - 1, c1)

    @property
    def area(self) -> int:
        return max(self.r1 - self.r0, 0) * max(self.c1 - self.c0, 0)

    def check(self, height: int, width: int) -> None:
        if not (0 <= self.r0 < self.r1 <= height and 0 <= self.c0 < self.c1 <= width):
            raise OutOfBounds(f"{self} outside a {height}x{width} image")

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.r0, self.r1), slice(self.c0, self.c1)


@dataclass(frozen=True)
class PatchGrid:
    height: int
    width: int
    patch_height: int
    patch_width: int

    def __post_init__(self):
        if self.patch_height < 1 or self.patch_width < 1:
            raise NonDivisiblePatch("patch size must be positive")
        if self.height % self.patch_height or self.width % self.patch_width:
            raise NonDivisiblePatch(
                f"patch {self.patch_height}x{self.patch_width} does not divide "
                f"image {self.height}x{self.width}"
            )

    @property
    def rows(self) -> int:
        return self.height // self.patch_height

    @property
    def cols(self) -> int:
        return self.width // self.patch_width

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    @property
    def coordinates(self) -> list[tuple[int, int, int, int]]:
        """1-based inclusive ``(start_row, end_row, start_col, end_col)``, row-major."""
        ph, pw = self.patch_height, self.patch_width
        return [
            (ph * i + 1, ph * (i + 1), pw * j + 1, pw * (j + 1))
            for i in range(self.rows)
            for j in range(self.cols)
        ]

    def rects(self) -> list[Rect]:
        return [Rect.from_inclusive(*c) for c in self.coordinates]

    def to_patches(self, a: np.ndarray) -> np.ndarray:
        """Reshape an ``(H, W, ...)`` array to ``(n_patches, ph*pw, ...)``."""
        a = np.asarray(a)
        ph, pw = self.patch_height, self.patch_width
        tail = a.shape[2:]
        blocks = a.reshape(self.rows, ph, self.cols, pw, *tail)
        blocks = np.moveaxis(blocks, 2, 1)
        return np.ascontiguousarray(blocks.reshape(self.n_patches, ph * pw, *tail))

    def from_patches(self, p: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_patches`."""
        p = np.asarray(p)
        ph, pw = self.patch_height, self.patch_width
        tail = p.shape[2:]
        blocks = p.reshape(self.rows, self.cols, ph, pw, *tail)
        blocks = np.moveaxis(blocks, 1, 2)
        return blocks.reshape(self.height, self.width, *tail)

    def expand(self, values) -> np.ndarray:
        """Broadcast one value per patch (leading axis) to a per-pixel map."""
        values = np.asarray(values, dtype=np.float64)
        tail = values.shape[1:]
        per = np.broadcast_to(
            values[:, None, ...], (self.n_patches, self.patch_height * self.patch_width, *tail)
        )
        return self.from_patches(per)

    def reduce_mean(self, a: np.ndarray) -> np.ndarray:
        """Per-patch mean of an ``(H, W, ...)`` map, shape ``(n_patches, ...)``."""
        return self.to_patches(a).mean(axis=1)


def make_patch_grid(h: int, w: int, ps: int, ps_w: Optional[int] = None) -> PatchGrid:
    return PatchGrid(int(h), int(w), int(ps), int(ps if ps_w is None else ps_w))


def patch_mean(img, rect: Rect) -> np.ndarray:
    """Per-channel arithmetic mean of ``img`` over ``rect``."""
    arr = np.asarray(img, dtype=np.float64)
    rect.check(arr.shape[0], arr.shape[1])
    rs, cs = rect.slices
    block = arr[rs, cs]
    return block.reshape(-1, *arr.shape[2:]).mean(axis=0)


@dataclass(frozen=True)
class ImageSequence:
    """Co-registered images of one scene, stacked as ``(N, H, W, 3)``."""

    images: np.ndarray
    airlight: Optional[np.ndarray] = None
    shutter: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        imgs = np.array(self.images, dtype=np.float64)
        if imgs.ndim != 4 or imgs.shape[3] != 3:
            raise InvalidImage(f"expected (N, H, W, 3) images, got {imgs.shape}")
        if not np.all(np.isfinite(imgs)):
            raise InvalidImage("image sequence contains non-finite values")
        object.__setattr__(self, "images", _freeze(imgs))
        n = imgs.shape[0]
        if self.times is None:
            object.__setattr__(self, "times", _freeze(np.arange(n)))
        for name in ("airlight", "shutter"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=np.float64)
                if v.shape[0] != n:
                    raise InvalidImage(f"{name} must have one entry per image")
                object.__setattr__(self, name, _freeze(v))

    @classmethod
    def from_images(cls, images: Sequence, **kw) -> "ImageSequence":
        return cls(np.stack([np.asarray(i, dtype=np.float64) for i in images]), **kw)

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.images[i]

    @property
    def shape(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; order of use never matters."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)]))


def luminance(img) -> np.ndarray:
    """Mean over colour channels."""
    return np.asarray(img, dtype=np.float64).mean(axis=-1)


@dataclass(frozen=True)
class TransmissionSeries:
    """Per-time transmittance maps, shape ``(n_times, *spatial)``.

    ``spatial`` is ``(n_patches,)`` when ``grid`` is set and values are one
    per patch, or any map shape otherwise.
    """

    values: np.ndarray
    grid: Optional[PatchGrid] = None
    clamp_index: Optional[int] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim < 2:
            raise InvalidImage("transmission series needs a time axis and a spatial axis")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    def maps(self) -> np.ndarray:
        """Per-pixel maps ``(n_times, H, W)``; identity when not per patch."""
        if self.grid is not None and self.values.ndim == 2:
            return np.stack([self.grid.expand(v) for v in self.values])
        return self.values
