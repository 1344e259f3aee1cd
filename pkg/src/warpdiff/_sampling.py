"""Shared bilinear sampling kernel used by warping and flow estimation.

Coordinates are pixel-center aligned: (0, 0) is the center of the first
pixel.  Two border policies are supported: ``clamp`` (replicate the edge
pixel) and ``zero`` (treat everything outside the frame as zero).
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

BORDER_POLICIES = ("clamp", "zero")


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                    border: str = "clamp") -> np.ndarray:
    """Sample a 2-D array at fractional coordinates (xs, ys).

    ``xs``/``ys`` are arrays of identical shape giving column/row positions.
    """
    if border not in BORDER_POLICIES:
        raise InvalidArgumentError(f"unknown border policy {border!r}")
    h, w = img.shape
    if border == "zero":
        # Pad with one zero ring; anything beyond the ring clips onto it,
        # which still reads zero, so the policy is exact at any distance.
        img = np.pad(img, 1, mode="constant")
        xs = np.clip(xs + 1.0, 0.0, w + 1.0)
        ys = np.clip(ys + 1.0, 0.0, h + 1.0)
        h, w = img.shape
    else:
        xs = np.clip(xs, 0.0, w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.minimum(x0, w - 2) if w > 1 else np.zeros_like(x0)
    y0 = np.minimum(y0, h - 2) if h > 1 else np.zeros_like(y0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy
