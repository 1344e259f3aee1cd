"""Classical dense optical flow with the pre-upscaling strategy, plus .flo I/O.

Flow fields use the backward convention: the value at target pixel (x, y)
points to its source location (x + u, y + v) in the reference frame, so the
warping module can sample the reference directly.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

from ._sampling import bilinear_sample
from .errors import FormatError, InvalidArgumentError
from .tensor import Tensor, upscale_nearest

FLO_MAGIC = 202021.25

ESTIMATORS = ("lucas_kanade_pyramidal", "farneback_polynomial")

# ITU-R 601 luminance weights for RGB reduction.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FlowField:
    """Dense backward displacement field (pixels)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(np.asarray(self.u, dtype=np.float64))
        v = np.ascontiguousarray(np.asarray(self.v, dtype=np.float64))
        if u.ndim != 2 or u.shape != v.shape:
            raise InvalidArgumentError("u and v must be 2-D arrays of identical shape")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InvalidArgumentError("flow values must be finite")
        h, w = u.shape
        if np.any(np.abs(u) >= w) or np.any(np.abs(v) >= h):
            raise InvalidArgumentError("displacements cannot exceed the frame size")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


@dataclass(frozen=True)
class FlowConfig:
    """Estimator settings.  Defaults: pyramidal Lucas-Kanade, 3 levels,
    21x21 window (radius 10), 5 iterations per level."""

    pyramid_levels: int = 3
    iterations: int = 5
    window_radius: int = 10
    estimator: str = "lucas_kanade_pyramidal"

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise InvalidArgumentError("pyramid_levels must be >= 1")
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be >= 1")
        if self.window_radius < 1:
            raise InvalidArgumentError("window_radius must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise InvalidArgumentError(
                f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}"
            )


def luminance(t: Tensor) -> np.ndarray:
    """Reduce a tensor to a single 2-D luminance plane (ITU-R 601 for RGB)."""
    if t.channels == 1:
        return t.data[0]
    if t.channels == 3:
        return np.tensordot(_LUMA, t.data, axes=1)
    return t.data.mean(axis=0)


def estimate_flow(reference: Tensor, target: Tensor, cfg: FlowConfig = FlowConfig()) -> FlowField:
    """Dense backward flow from the target frame toward the reference frame."""
    if reference.shape != target.shape:
        raise InvalidArgumentError(
            f"frame shapes differ: {reference.shape} vs {target.shape}"
        )
    ref = luminance(reference)
    tgt = luminance(target)
    if cfg.estimator == "farneback_polynomial":
        return _farneback(ref, tgt, cfg)
    return _lucas_kanade_pyramidal(ref, tgt, cfg)


def prescaled_flow(reference: Tensor, target: Tensor, s: int,
                   cfg: FlowConfig = FlowConfig()) -> FlowField:
    """Estimate flow between nearest-upscaled frames.

    Returns the sH x sW field in high-resolution pixel units.  Extra pyramid
    levels are added with the factor so the enlarged displacements stay within
    the estimator's capture range.
    """
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise InvalidArgumentError(f"rescaling factor must be a positive integer, got {s!r}")
    if s == 1:
        return estimate_flow(reference, target, cfg)
    ref_hr = upscale_nearest(reference, s)
    tgt_hr = upscale_nearest(target, s)
    extra = int(np.ceil(np.log2(s)))
    cfg_hr = FlowConfig(
        pyramid_levels=cfg.pyramid_levels + extra,
        iterations=cfg.iterations,
        window_radius=cfg.window_radius,
        estimator=cfg.estimator,
    )
    return estimate_flow(ref_hr, tgt_hr, cfg_hr)


# --------------------------------------------------------------------------- #
# Pyramidal Lucas-Kanade
# --------------------------------------------------------------------------- #

def _build_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [img]
    for _ in range(levels - 1):
        cur = pyr[-1]
        if min(cur.shape) < 16:
            break
        pyr.append(gaussian_filter(cur, sigma=1.0, mode="nearest")[::2, ::2])
    return pyr


def _upsample_flow(u: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    out = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)
    return out[: shape[0], : shape[1]]


def _lk_level(ref: np.ndarray, tgt: np.ndarray, u: np.ndarray, v: np.ndarray,
              cfg: FlowConfig) -> tuple[np.ndarray, np.ndarray]:
    h, w = ref.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    size = 2 * cfg.window_radius + 1
    step_cap = float(cfg.window_radius)
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for _ in range(cfg.iterations):
        warped = bilinear_sample(ref, xs + u, ys + v, border="clamp")
        r = tgt - warped
        # Interpolation bias makes extra iterations drift once the residual
        # is at the noise floor; keep the lowest-energy iterate instead of
        # trusting the last one.
        energy = float(np.mean(r * r))
        if best is None or energy < best[0]:
            best = (energy, u, v)
        elif energy > best[0]:
            u, v = best[1], best[2]
            break
        gy, gx = np.gradient(warped)
        sxx = uniform_filter(gx * gx, size=size, mode="nearest")
        sxy = uniform_filter(gx * gy, size=size, mode="nearest")
        syy = uniform_filter(gy * gy, size=size, mode="nearest")
        sxr = uniform_filter(gx * r, size=size, mode="nearest")
        syr = uniform_filter(gy * r, size=size, mode="nearest")
        # Regularized 2x2 solve; flat windows get ~zero update.
        eps = 1e-6 * float(np.mean(sxx + syy)) + 1e-12
        det = (sxx + eps) * (syy + eps) - sxy * sxy
        du = np.clip(((syy + eps) * sxr - sxy * syr) / det, -step_cap, step_cap)
        dv = np.clip(((sxx + eps) * syr - sxy * sxr) / det, -step_cap, step_cap)
        u = np.clip(u + du, -(w - 1.0), w - 1.0)
        v = np.clip(v + dv, -(h - 1.0), h - 1.0)
    warped = bilinear_sample(ref, xs + u, ys + v, border="clamp")
    if best is not None and float(np.mean((tgt - warped) ** 2)) > best[0]:
        u, v = best[1], best[2]
    return u, v


def _lucas_kanade_pyramidal(ref: np.ndarray, tgt: np.ndarray, cfg: FlowConfig) -> FlowField:
    # Mild pre-smoothing stabilizes gradients on blocky (nearest-upscaled) input.
    ref_s = gaussian_filter(ref, sigma=1.0, mode="nearest")
    tgt_s = gaussian_filter(tgt, sigma=1.0, mode="nearest")
    pyr_ref = _build_pyramid(ref_s, cfg.pyramid_levels)
    pyr_tgt = _build_pyramid(tgt_s, cfg.pyramid_levels)
    u = np.zeros_like(pyr_ref[-1])
    v = np.zeros_like(pyr_ref[-1])
    for level in range(len(pyr_ref) - 1, -1, -1):
        if level < len(pyr_ref) - 1:
            u = _upsample_flow(u * 2.0, pyr_ref[level].shape)
            v = _upsample_flow(v * 2.0, pyr_ref[level].shape)
        u, v = _lk_level(pyr_ref[level], pyr_tgt[level], u, v, cfg)
    h, w = ref.shape
    u = np.clip(u, -(w - 1.0), w - 1.0)
    v = np.clip(v, -(h - 1.0), h - 1.0)
    return FlowField(u=u, v=v)


# --------------------------------------------------------------------------- #
# Farneback (OpenCV)
# --------------------------------------------------------------------------- #

def _farneback(ref: np.ndarray, tgt: np.ndarray, cfg: FlowConfig) -> FlowField:
    lo, hi = min(ref.min(), tgt.min()), max(ref.max(), tgt.max())
    scale = 255.0 / (hi - lo) if hi > lo else 1.0
    ref8 = np.clip((ref - lo) * scale, 0, 255).astype(np.uint8)
    tgt8 = np.clip((tgt - lo) * scale, 0, 255).astype(np.uint8)
    # prev=target, next=reference so the field maps target pixels to their
    # source location in the reference (backward convention).
    flow = cv2.calcOpticalFlowFarneback(
        tgt8, ref8, None,
        pyr_scale=0.5, levels=cfg.pyramid_levels,
        winsize=2 * cfg.window_radius + 1,
        iterations=cfg.iterations, poly_n=5, poly_sigma=1.1, flags=0,
    )
    h, w = ref.shape
    u = np.clip(flow[:, :, 0].astype(np.float64), -(w - 1.0), w - 1.0)
    v = np.clip(flow[:, :, 1].astype(np.float64), -(h - 1.0), h - 1.0)
    return FlowField(u=u, v=v)


# --------------------------------------------------------------------------- #
# Middlebury .flo I/O
# --------------------------------------------------------------------------- #

def write_flo(f: FlowField, path) -> None:
    """Write a Middlebury .flo file (interleaved u, v float32 pairs)."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", FLO_MAGIC))
        fh.write(struct.pack("<ii", f.width, f.height))
        interleaved = np.empty((f.height, f.width, 2), dtype="<f4")
        interleaved[:, :, 0] = f.u
        interleaved[:, :, 1] = f.v
        fh.write(interleaved.tobytes())


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file written by :func:`write_flo`."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"flow file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 12:
        raise FormatError(f"truncated .flo header in {path}")
    (magic,) = struct.unpack_from("<f", blob, 0)
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad .flo magic in {path}: {magic!r}")
    w, h = struct.unpack_from("<ii", blob, 4)
    if w < 1 or h < 1:
        raise FormatError(f"non-positive .flo dimensions: {(w, h)}")
    expected = h * w * 2 * 4
    payload = blob[12:]
    if len(payload) != expected:
        raise FormatError(
            f".flo payload size mismatch in {path}: expected {expected}, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, 2)
    return FlowField(u=arr[:, :, 0].astype(np.float64), v=arr[:, :, 1].astype(np.float64))
