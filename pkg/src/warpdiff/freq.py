"""High-frequency measurement suite: edge strength (Canny / Sobel / Laplacian)
and FFT high-pass spectrum energy, plus the alignment-strategy comparison
report generators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.ndimage import convolve
from skimage.feature import canny as _skimage_canny

from .errors import InvalidArgumentError
from .flow import FlowField
from .reports import ArmMetrics, FrequencyReport, SweepEntry, SweepReport
from .tensor import Tensor
from .warp import ogwm_align, warp_direct

EDGE_KINDS = ("canny", "sobel", "laplacian")

_SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                     [-2.0, 0.0, 2.0],
                     [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T
_LAPLACIAN = np.array([[0.0, 1.0, 0.0],
                       [1.0, -4.0, 1.0],
                       [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class EdgeOperator:
    """Edge-strength operator: Canny edge density or Sobel/Laplacian mean
    response magnitude."""

    kind: str
    canny_sigma: float = 1.4
    canny_low: float = 0.1
    canny_high: float = 0.2

    def __post_init__(self):
        if self.kind not in EDGE_KINDS:
            raise InvalidArgumentError(f"edge operator must be one of {EDGE_KINDS}")
        if not (0.0 < self.canny_low < self.canny_high):
            raise InvalidArgumentError("canny thresholds must satisfy 0 < low < high")


DEFAULT_OPERATORS = tuple(EdgeOperator(kind=k) for k in EDGE_KINDS)


def edge_strength(t: Tensor, op: EdgeOperator) -> float:
    """Scalar high-frequency summary of a tensor under one edge operator.

    Canny: fraction of pixels marked edge.  Sobel: mean gradient magnitude.
    Laplacian: mean absolute response.  Channels are averaged.
    """
    if t.height < 3 or t.width < 3:
        raise InvalidArgumentError("edge operators need at least a 3x3 image")
    values = []
    for c in range(t.channels):
        plane = t.data[c]
        if op.kind == "canny":
            edges = _skimage_canny(plane, sigma=op.canny_sigma,
                                   low_threshold=op.canny_low,
                                   high_threshold=op.canny_high)
            values.append(float(edges.mean()))
        elif op.kind == "sobel":
            gx = convolve(plane, _SOBEL_X, mode="nearest")
            gy = convolve(plane, _SOBEL_Y, mode="nearest")
            values.append(float(np.hypot(gx, gy).mean()))
        else:
            resp = convolve(plane, _LAPLACIAN, mode="nearest")
            values.append(float(np.abs(resp).mean()))
    return float(np.mean(values))


def _centered_distance_grid(h: int, w: int) -> np.ndarray:
    dy = np.arange(h) - h // 2
    dx = np.arange(w) - w // 2
    return np.hypot(dy[:, None], dx[None, :])


def highpass_strength(t: Tensor, radius: float) -> float:
    """Spectral energy beyond ``radius`` (Euclidean distance from DC in
    centered-frequency pixels), normalized so that highpass + DC share
    Parseval's identity with the mean squared value."""
    if radius < 0:
        raise InvalidArgumentError("radius must be nonnegative")
    h, w = t.height, t.width
    dist = _centered_distance_grid(h, w)
    mask = dist > radius
    norm = float(h * w) ** 2
    values = []
    for c in range(t.channels):
        spectrum = np.fft.fftshift(np.fft.fft2(t.data[c]))
        energy = np.abs(spectrum) ** 2
        values.append(float(energy[mask].sum() / norm))
    return float(np.mean(values))


def dc_energy(t: Tensor) -> float:
    """DC spectral energy per pixel squared; companion to highpass_strength
    in the Parseval identity (highpass(t, 0) + dc_energy(t) == mean(t**2))."""
    values = []
    norm = float(t.height * t.width) ** 2
    for c in range(t.channels):
        values.append(float(abs(np.fft.fft2(t.data[c])[0, 0]) ** 2 / norm))
    return float(np.mean(values))


def _reduction_percent(original: float, arm: float) -> float:
    if original == 0.0:
        return 0.0
    return 100.0 * (original - arm) / original


def downscale_flow(flow_hr: FlowField, s: int) -> FlowField:
    """Derive the native-resolution field from an s-times field: subsample the
    grid and divide the displacements by s, so both warping arms are driven
    by the same motion estimate."""
    if s == 1:
        return flow_hr
    return FlowField(u=flow_hr.u[::s, ::s] / s, v=flow_hr.v[::s, ::s] / s)


def alignment_report(frames: Sequence[Tensor], flows: Sequence[FlowField], s: int,
                       ops: Iterable[EdgeOperator] = DEFAULT_OPERATORS,
                       radius: float = 30.0) -> FrequencyReport:
    """Compare alignment arms (original, direct warp, rescaled warp) over a
    sequence, measuring everything at the native resolution.

    ``flows[i]`` must be the s-times-resolution backward field warping
    ``frames[i]`` toward ``frames[i + 1]``.
    """
    if len(frames) < 2:
        raise InvalidArgumentError("need at least two frames")
    if len(flows) != len(frames) - 1:
        raise InvalidArgumentError(
            f"expected {len(frames) - 1} flow fields, got {len(flows)}"
        )
    ops = list(ops)
    if not ops:
        raise InvalidArgumentError("need at least one edge operator")

    arm_names = ("original", "warp_direct", "ogwm_align")
    edge_acc: dict[str, dict[str, list[float]]] = {
        op.kind: {a: [] for a in arm_names} for op in ops
    }
    hp_acc: dict[str, list[float]] = {a: [] for a in arm_names}

    for i, flow_hr in enumerate(flows):
        src = frames[i]
        if flow_hr.shape != (src.height * s, src.width * s):
            raise InvalidArgumentError(
                f"flow {i} has shape {flow_hr.shape}, expected "
                f"{(src.height * s, src.width * s)}"
            )
        arms = {
            "original": src,
            "warp_direct": warp_direct(src, downscale_flow(flow_hr, s)),
            "ogwm_align": ogwm_align(src, flow_hr, s),
        }
        for name, arm in arms.items():
            hp_acc[name].append(highpass_strength(arm, radius))
            for op in ops:
                edge_acc[op.kind][name].append(edge_strength(arm, op))

    arm_metrics = {
        name: ArmMetrics(
            edge_strength={op.kind: float(np.mean(edge_acc[op.kind][name])) for op in ops},
            highpass_strength=float(np.mean(hp_acc[name])),
        )
        for name in arm_names
    }
    edge_reduction = {
        op.kind: {
            name: _reduction_percent(
                arm_metrics["original"].edge_strength[op.kind],
                arm_metrics[name].edge_strength[op.kind],
            )
            for name in arm_names
        }
        for op in ops
    }
    hp_reduction = {
        name: _reduction_percent(
            arm_metrics["original"].highpass_strength,
            arm_metrics[name].highpass_strength,
        )
        for name in arm_names
    }
    return FrequencyReport(
        arms=arm_metrics,
        edge_reduction_percent=edge_reduction,
        highpass_reduction_percent=hp_reduction,
        scale=int(s),
        highpass_radius=float(radius),
        pair_count=len(flows),
    )


def rescaling_sweep(frames: Sequence[Tensor],
                    flows_per_s: Mapping[int, Sequence[FlowField]],
                    s_values: Sequence[int],
                    ops: Iterable[EdgeOperator] = DEFAULT_OPERATORS,
                    radius: float = 30.0) -> SweepReport:
    """One alignment report per rescaling factor."""
    if not s_values:
        raise InvalidArgumentError("s_values must be nonempty")
    ops = list(ops)
    entries = []
    for s in s_values:
        if s not in flows_per_s:
            raise InvalidArgumentError(f"no flow fields supplied for factor {s}")
        report = alignment_report(frames, flows_per_s[s], s, ops=ops, radius=radius)
        entries.append(SweepEntry(scale=int(s), report=report))
    return SweepReport(entries=entries)
