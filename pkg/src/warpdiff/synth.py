"""Synthetic sequence generation with analytically known motion, and the
bundled natural test sequence."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from ._sampling import bilinear_sample
from .errors import InvalidArgumentError
from .tensor import Tensor, load_image

KINDS = ("translate", "rotate", "textured_noise")


@dataclass(frozen=True)
class SyntheticParams:
    """Parameters for the synthetic generators; unused fields are ignored by
    the kinds that do not need them."""

    frames: int = 5
    height: int = 128
    width: int = 128
    channels: int = 1
    shift: tuple[float, float] = (3.0, 0.0)  # (dx, dy) pixels per frame
    angle_deg: float = 2.0  # degrees per frame
    noise_sigma: float = 0.05
    texture_sigma: float = 2.0

    def __post_init__(self):
        if self.frames < 2:
            raise InvalidArgumentError("need at least two frames")
        if self.height < 8 or self.width < 8:
            raise InvalidArgumentError("frames must be at least 8x8")
        if self.channels < 1:
            raise InvalidArgumentError("channels must be positive")
        if self.noise_sigma < 0 or self.texture_sigma <= 0:
            raise InvalidArgumentError("sigmas must be positive")


def _base_texture(rng: np.random.Generator, h: int, w: int, c: int,
                  sigma: float) -> np.ndarray:
    """Band-limited random texture with a broad range of spatial scales."""
    planes = []
    for _ in range(c):
        fine = gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
        coarse = gaussian_filter(rng.standard_normal((h, w)), sigma * 4.0, mode="wrap")
        plane = 0.7 * fine + 0.3 * coarse
        lo, hi = plane.min(), plane.max()
        planes.append((plane - lo) / (hi - lo) if hi > lo else np.full_like(plane, 0.5))
    return np.stack(planes, axis=0)


def _sample_at_offset(base: np.ndarray, dx: float, dy: float) -> np.ndarray:
    c, h, w = base.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return np.stack([bilinear_sample(base[k], xs + dx, ys + dy, border="clamp")
                     for k in range(c)], axis=0)


def generate_synthetic_sequence(kind: str, params: SyntheticParams,
                                seed: int) -> list[Tensor]:
    """Deterministic sequence with known ground-truth motion.

    ``translate``: frame i is the base shifted by i * shift (clamped borders).
    ``rotate``: frame i is the base rotated by i * angle about the center.
    ``textured_noise``: static texture plus independent per-frame noise.
    """
    if kind not in KINDS:
        raise InvalidArgumentError(f"kind must be one of {KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    base = _base_texture(rng, params.height, params.width, params.channels,
                         params.texture_sigma)
    frames: list[Tensor] = []
    if kind == "translate":
        dx, dy = params.shift
        for i in range(params.frames):
            frames.append(Tensor(_sample_at_offset(base, dx * i, dy * i)))
    elif kind == "rotate":
        h, w = params.height, params.width
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        for i in range(params.frames):
            theta = np.deg2rad(params.angle_deg * i)
            cos_t, sin_t = np.cos(theta), np.sin(theta)
            sx = cx + cos_t * (xs - cx) - sin_t * (ys - cy)
            sy = cy + sin_t * (xs - cx) + cos_t * (ys - cy)
            frames.append(Tensor(np.stack(
                [bilinear_sample(base[k], sx, sy, border="clamp")
                 for k in range(params.channels)], axis=0)))
    else:
        for _ in range(params.frames):
            noisy = base + params.noise_sigma * rng.standard_normal(base.shape)
            frames.append(Tensor(np.clip(noisy, 0.0, 1.0)))
    return frames


def rotation_flow(params: SyntheticParams) -> tuple[np.ndarray, np.ndarray]:
    """Analytic backward flow between adjacent frames of a ``rotate`` sequence:
    the target pixel's source location lies one frame-angle behind it."""
    h, w = params.height, params.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    theta = np.deg2rad(params.angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    sx = cx + cos_t * (xs - cx) - sin_t * (ys - cy)
    sy = cy + sin_t * (xs - cx) + cos_t * (ys - cy)
    return sx - xs, sy - ys


def bundled_sequence() -> list[Tensor]:
    """The natural test sequence shipped with the package (grayscale PNGs,
    lexicographic frame order)."""
    root = resources.files("warpdiff").joinpath("data/sequence")
    paths = sorted(p for p in root.iterdir() if p.name.endswith(".png"))
    if not paths:
        raise FileNotFoundError("bundled sequence is missing from the package data")
    frames = []
    for p in paths:
        with resources.as_file(p) as fs_path:
            frames.append(load_image(Path(fs_path)))
    return frames
