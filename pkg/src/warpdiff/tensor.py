"""Planar C x H x W tensor type with rescaling and image / raw-container I/O.

All pixel data is kept as float64 internally; image files are mapped to the
[0, 1] range on load.  The raw container is a little-endian float32 format
(magic ``WDT1``) described in :func:`save_raw`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidArgumentError

RAW_MAGIC = b"WDT1"
_RAW_HEADER = struct.Struct("<III")

# Refuse raw headers that would allocate absurd amounts of memory.
MAX_RAW_DIM = 1 << 20
MAX_RAW_ELEMENTS = 1 << 28


@dataclass(frozen=True)
class Tensor:
    """Immutable planar tensor of shape (channels, height, width).

    Values must be finite; operations in this package never produce NaN/Inf.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 3:
            raise InvalidArgumentError(
                f"tensor data must be 3-dimensional (C, H, W), got ndim={arr.ndim}"
            )
        if min(arr.shape) < 1:
            raise InvalidArgumentError(f"tensor dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("tensor values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def from_planes(*planes: np.ndarray) -> Tensor:
    """Stack 2-D arrays into a Tensor, one per channel."""
    return Tensor(np.stack([np.asarray(p, dtype=np.float64) for p in planes], axis=0))


def upscale_nearest(t: Tensor, s: int) -> Tensor:
    """Replicate each pixel into an s x s block."""
    _check_factor(s)
    if s == 1:
        return t
    out = np.repeat(np.repeat(t.data, s, axis=1), s, axis=2)
    return Tensor(out)


def downscale_nearest(t: Tensor, s: int) -> Tensor:
    """Keep the top-left pixel of each s x s block.

    Exact inverse of :func:`upscale_nearest` with the same factor.
    """
    _check_factor(s)
    if s == 1:
        return t
    if t.height % s or t.width % s:
        raise InvalidArgumentError(
            f"dimensions {t.height}x{t.width} not divisible by factor {s}"
        )
    return Tensor(t.data[:, ::s, ::s])


def _cubic_weights(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Cubic convolution kernel (Catmull-Rom style for a = -0.5)."""
    ax = np.abs(x)
    w = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    w[near] = (a + 2.0) * ax[near] ** 3 - (a + 3.0) * ax[near] ** 2 + 1.0
    w[far] = a * ax[far] ** 3 - 5.0 * a * ax[far] ** 2 + 8.0 * a * ax[far] - 4.0 * a
    return w


def _cubic_axis(data: np.ndarray, s: int, axis: int) -> np.ndarray:
    """Upscale one spatial axis by s with cubic convolution, border clamped."""
    n = data.shape[axis]
    # Output coordinate i samples the source at i / s (top-left phase, so that
    # s = 1 is the identity and the nearest/cubic paths share a convention).
    coords = np.arange(n * s, dtype=np.float64) / s
    base = np.floor(coords).astype(np.int64)
    frac = coords - base
    idx = np.stack([base - 1, base, base + 1, base + 2], axis=-1)
    idx = np.clip(idx, 0, n - 1)
    offs = np.stack([frac + 1.0, frac, 1.0 - frac, 2.0 - frac], axis=-1)
    w = _cubic_weights(offs)
    w /= w.sum(axis=-1, keepdims=True)  # exact partition of unity after clamping

    moved = np.moveaxis(data, axis, 0)
    gathered = moved[idx]  # (n*s, 4, ...)
    out = np.einsum("ok,ok...->o...", w, gathered)
    return np.moveaxis(out, 0, axis)


def upscale_bicubic(t: Tensor, s: int) -> Tensor:
    """Separable cubic-convolution upscale (a = -0.5), border clamped."""
    _check_factor(s)
    if s == 1:
        return t
    out = _cubic_axis(t.data, s, axis=1)
    out = _cubic_axis(out, s, axis=2)
    return Tensor(out)


def _check_factor(s: int) -> None:
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise InvalidArgumentError(f"rescaling factor must be a positive integer, got {s!r}")


# --------------------------------------------------------------------------- #
# File I/O
# --------------------------------------------------------------------------- #

def load_image(path) -> Tensor:
    """Load an 8-bit grayscale or RGB image, values mapped to [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as img:
        if img.mode == "1":
            img = img.convert("L")
        elif img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = np.moveaxis(arr, -1, 0)
    return Tensor(arr)


def save_image(t: Tensor, path) -> None:
    """Write a tensor as an 8-bit PNG/PGM image.  Values are clipped to [0, 1]."""
    if t.channels not in (1, 3):
        raise InvalidArgumentError(
            f"image export requires 1 or 3 channels, got {t.channels}"
        )
    arr = np.clip(t.data, 0.0, 1.0)
    arr8 = np.round(arr * 255.0).astype(np.uint8)
    if t.channels == 1:
        img = Image.fromarray(arr8[0], mode="L")
    else:
        img = Image.fromarray(np.moveaxis(arr8, 0, -1), mode="RGB")
    img.save(path)


def save_raw(t: Tensor, path) -> None:
    """Write the raw container: ``WDT1`` magic, uint32 C, H, W, float32 payload.

    All fields little-endian; payload is planar row-major.  Lossless for
    float32-representable values.
    """
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(_RAW_HEADER.pack(t.channels, t.height, t.width))
        f.write(t.data.astype("<f4").tobytes())


def load_raw(path) -> Tensor:
    """Read the raw container written by :func:`save_raw`."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"raw tensor not found: {path}")
    blob = path.read_bytes()
    header_len = len(RAW_MAGIC) + _RAW_HEADER.size
    if len(blob) < header_len:
        raise FormatError(f"truncated raw header in {path}")
    if blob[: len(RAW_MAGIC)] != RAW_MAGIC:
        raise FormatError(f"bad magic bytes in {path}: {blob[:4]!r}")
    c, h, w = _RAW_HEADER.unpack_from(blob, len(RAW_MAGIC))
    if min(c, h, w) < 1:
        raise FormatError(f"non-positive dimensions in raw header: {(c, h, w)}")
    if max(c, h, w) > MAX_RAW_DIM or c * h * w > MAX_RAW_ELEMENTS:
        raise FormatError(f"raw header dimensions overflow sanity bounds: {(c, h, w)}")
    expected = c * h * w * 4
    payload = blob[header_len:]
    if len(payload) != expected:
        raise FormatError(
            f"raw payload size mismatch in {path}: expected {expected} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(c, h, w)
    return Tensor(arr)
