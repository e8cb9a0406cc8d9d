"""Image files: 8/16-bit PNG and TIFF via OpenCV, and a lossless raw float format.

The raw format is a 16-byte header (``b"HZB1"``, then little-endian u32
height, width, channels) followed by float64 samples in row-major order.
"""
from __future__ import annotations

import struct
from pathlib import Path

import cv2
import numpy as np

from .core import linear_image
from .errors import InvalidImage

MAGIC = b"HZB1"
_HEADER = struct.Struct("<4sIII")


def read_image(path) -> np.ndarray:
    """Load a PNG/TIFF (RGB or grayscale) or ``.hzb`` file as float64 ``(H, W, 3)``."""
    path = Path(path)
    if path.suffix.lower() == ".hzb":
        arr = read_raw(path)
    else:
        data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if data is None:
            raise InvalidImage(f"cannot read image {path}")
        if data.ndim == 2:
            data = np.repeat(data[..., None], 3, axis=2)
        elif data.shape[2] == 4:
            data = data[..., :3]
        arr = data[..., ::-1]
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return np.array(linear_image(arr))


def read_gray(path) -> np.ndarray:
    """Single-channel map (first channel) as float64."""
    path = Path(path)
    if path.suffix.lower() == ".hzb":
        arr = read_raw(path)
        return arr[..., 0] if arr.ndim == 3 else arr
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise InvalidImage(f"cannot read image {path}")
    if data.ndim == 3:
        data = data[..., 0]
    return data.astype(np.float64) / float(np.iinfo(data.dtype).max)


def _to_codes(arr: np.ndarray, bits: int) -> np.ndarray:
    top = (1 << bits) - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    return np.round(np.clip(arr, 0.0, 1.0) * top).astype(dtype)


def write_image(path, img, bits: int = 16) -> None:
    """Write ``(H, W, 3)`` or ``(H, W)`` values in [0, 1] (clipped) as PNG/TIFF or raw ``.hzb``."""
    path = Path(path)
    arr = np.asarray(img, dtype=np.float64)
    if path.suffix.lower() == ".hzb":
        write_raw(path, arr)
        return
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    codes = _to_codes(arr, bits)
    if codes.ndim == 3:
        codes = np.ascontiguousarray(codes[..., ::-1])
    if not cv2.imwrite(str(path), codes):
        raise InvalidImage(f"cannot write image {path}")


def write_raw(path, arr) -> None:
    a = np.asarray(arr, dtype="<f8")
    if a.ndim == 2:
        a = a[..., None]
    if a.ndim != 3:
        raise InvalidImage("raw dumps hold (H, W) or (H, W, C) arrays")
    h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, h, w, c))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_raw(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise InvalidImage("raw file too short")
    magic, h, w, c = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InvalidImage(f"bad magic {magic!r}")
    n = h * w * c
    if len(blob) != _HEADER.size + 8 * n:
        raise InvalidImage("raw payload size does not match header")
    return np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(h, w, c).copy()


IMAGE_SUFFIXES = (".png", ".tif", ".tiff", ".hzb")


def list_images(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise InvalidImage(f"{d} is not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise InvalidImage(f"no images in {d}")
    return files
