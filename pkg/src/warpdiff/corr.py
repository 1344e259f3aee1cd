"""Correlation metrics (SSIM, PSNR, cross-entropy, standard deviation and
their 1/(1+x) transforms) plus the optical-flow temporal-consistency metric."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidArgumentError
from .flow import FlowConfig, estimate_flow
from .reports import CorrelationReport
from .tensor import Tensor

PSNR_CAP_DB = 100.0

_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5  # 11x11 window at sigma 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(a: Tensor, b: Tensor, peak: float = 1.0) -> float:
    """10 * log10(peak^2 / MSE), capped at 100 dB for identical inputs."""
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise InvalidArgumentError("peak must be positive")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def _ssim_plane(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    filt = lambda im: gaussian_filter(im, sigma=_SSIM_SIGMA, truncate=_SSIM_TRUNCATE)
    ux, uy = filt(x), filt(y)
    uxx, uyy, uxy = filt(x * x), filt(y * y), filt(x * y)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    ssim_map = ((2 * ux * uy + c1) * (2 * vxy + c2)) / \
               ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    # Ignore the filter-radius border, where the window hangs off the image.
    pad = int(_SSIM_TRUNCATE * _SSIM_SIGMA + 0.5)
    return float(ssim_map[pad:-pad, pad:-pad].mean())


def ssim(a: Tensor, b: Tensor, data_range: float = 1.0) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), channels
    averaged."""
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.height < 11 or a.width < 11:
        raise InvalidArgumentError("SSIM needs at least an 11x11 image")
    return float(np.mean([_ssim_plane(a.data[c], b.data[c], data_range)
                          for c in range(a.channels)]))


def _smoothed_histogram(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    # Add-one (Laplace) smoothing keeps the cross-entropy finite on
    # disjoint supports.
    smoothed = counts.astype(np.float64) + 1.0
    return smoothed / smoothed.sum()


def cross_entropy(a: Tensor, b: Tensor, bins: int = 256) -> float:
    """H(p, q) in bits over jointly min-max normalized value histograms."""
    if bins < 2:
        raise InvalidArgumentError("bins must be >= 2")
    av, bv = a.data.ravel(), b.data.ravel()
    lo = min(av.min(), bv.min())
    hi = max(av.max(), bv.max())
    if hi <= lo:
        hi = lo + 1.0  # constant joint range: everything lands in one bin
    p = _smoothed_histogram(av, lo, hi, bins)
    q = _smoothed_histogram(bv, lo, hi, bins)
    return float(-np.sum(p * np.log2(q)))


def sigma_intra(a: Tensor) -> float:
    """Population standard deviation over all elements."""
    return float(np.std(a.data))


def f_transform(x: float) -> float:
    """Map a nonnegative spread/entropy value into (0, 1]; strictly
    decreasing, so larger outputs mean stronger correlation."""
    if x < 0:
        raise InvalidArgumentError("f_transform expects a nonnegative value")
    return 1.0 / (1.0 + x)


def correlation_profile(seq: Sequence[Tensor], bins: int = 256,
                        domain: str = "pixel",
                        sigma_mode: str = "per_variable") -> CorrelationReport:
    """Adjacent-pair SSIM / PSNR / F(H) plus F(sigma) over a sequence.

    ``sigma_mode`` selects whether sigma is taken per variable (default) or
    over the difference of adjacent variables.
    """
    if len(seq) < 2:
        raise InvalidArgumentError("need at least two tensors")
    if sigma_mode not in ("per_variable", "pairwise_difference"):
        raise InvalidArgumentError(f"unknown sigma_mode {sigma_mode!r}")
    shape = seq[0].shape
    for t in seq[1:]:
        if t.shape != shape:
            raise InvalidArgumentError("all tensors must share dimensions")

    ssims, psnrs, f_ents = [], [], []
    for prev, cur in zip(seq, seq[1:]):
        ssims.append(ssim(prev, cur))
        psnrs.append(psnr(prev, cur))
        f_ents.append(f_transform(cross_entropy(prev, cur, bins=bins)))
    if sigma_mode == "per_variable":
        f_sigmas = [f_transform(sigma_intra(t)) for t in seq]
    else:
        f_sigmas = [f_transform(sigma_intra(Tensor(cur.data - prev.data)))
                    for prev, cur in zip(seq, seq[1:])]
    return CorrelationReport(
        mean_ssim=float(np.mean(ssims)),
        mean_psnr_db=float(np.mean(psnrs)),
        mean_f_entropy=float(np.mean(f_ents)),
        mean_f_sigma=float(np.mean(f_sigmas)),
        pair_count=len(seq) - 1,
        domain=domain,
        sigma_mode=sigma_mode,
    )


def tof(output_seq: Sequence[Tensor], reference_seq: Sequence[Tensor],
        cfg: FlowConfig = FlowConfig()) -> float:
    """Temporal consistency: mean L1 difference between the optical flows of
    consecutive outputs and consecutive references."""
    if len(output_seq) != len(reference_seq):
        raise InvalidArgumentError("sequences must have equal length")
    if len(output_seq) < 2:
        raise InvalidArgumentError("need at least two frames per sequence")
    for out, ref in zip(output_seq, reference_seq):
        if out.shape != ref.shape:
            raise InvalidArgumentError("frame dimensions must match across sequences")
    diffs = []
    for i in range(1, len(output_seq)):
        f_out = estimate_flow(output_seq[i - 1], output_seq[i], cfg)
        f_ref = estimate_flow(reference_seq[i - 1], reference_seq[i], cfg)
        diffs.append(float(np.mean(np.abs(f_out.u - f_ref.u) + np.abs(f_out.v - f_ref.v))))
    return float(np.mean(diffs))
