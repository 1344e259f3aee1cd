"""Diffusion schedule math, pluggable denoisers, the closed-form Gaussian
oracle denoiser, the zero-initialized guided step, and the paired
forward/backward guided sequence runner.

Denoisers follow a single contract: ``denoiser(z_t, t, context) -> eps_hat``
where ``context`` is a mapping of named conditioning tensors.  The runner
treats input frames directly as the latent variables (no autoencoder at this
scale).
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .corr import tof
from .errors import InvalidArgumentError, SingularScheduleError
from .flow import FlowConfig, FlowField, prescaled_flow
from .reports import FrameStats, GuidanceRunReport
from .tensor import Tensor
from .warp import ogwm_align

Denoiser = Callable[[Tensor, int, Mapping[str, Tensor]], Tensor]


@dataclass(frozen=True)
class Schedule:
    """Per-step diffusion tables, 1-indexed by step t via ``t - 1``."""

    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    beta_start: float
    beta_end: float
    variance_kind: str = "beta_tilde"

    def __post_init__(self):
        for name in ("alpha", "alpha_bar", "sigma"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.alpha) == len(self.alpha_bar) == len(self.sigma)):
            raise InvalidArgumentError("schedule tables must have equal length")

    @property
    def steps(self) -> int:
        return len(self.alpha)


def _sigma_table(alpha: np.ndarray, alpha_bar: np.ndarray, kind: str) -> np.ndarray:
    """Reverse-step noise scale: sqrt(beta_tilde) (default, lower-variance)
    or sqrt(beta).  The final step is always deterministic."""
    if kind not in ("beta_tilde", "beta"):
        raise InvalidArgumentError(f"unknown variance kind {kind!r}")
    beta = 1.0 - alpha
    if kind == "beta":
        sigma = np.sqrt(beta)
    else:
        alpha_bar_prev = np.concatenate(([1.0], alpha_bar[:-1]))
        beta_tilde = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * beta
        sigma = np.sqrt(np.maximum(beta_tilde, 0.0))
    sigma[0] = 0.0
    return sigma


def build_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02,
                   variance_kind: str = "beta_tilde") -> Schedule:
    """Linear beta ramp; alpha_t = 1 - beta_t, alpha_bar cumulative product,
    sigma_t from the selected variance kind."""
    if T < 1:
        raise InvalidArgumentError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidArgumentError(
            f"betas must satisfy 0 < start <= end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = _sigma_table(alpha, alpha_bar, variance_kind)
    return Schedule(alpha=alpha, alpha_bar=alpha_bar, sigma=sigma,
                    beta_start=float(beta_start), beta_end=float(beta_end),
                    variance_kind=variance_kind)


def respace(sched: Schedule, steps: int, variance_kind: str | None = None) -> Schedule:
    """Strided sub-schedule: keep ``steps`` evenly spaced entries of the full
    alpha_bar table and rebuild alpha / sigma from the ratios."""
    if not (1 <= steps <= sched.steps):
        raise InvalidArgumentError(f"steps must be in [1, {sched.steps}]")
    kind = variance_kind or sched.variance_kind
    idx = np.linspace(0, sched.steps - 1, steps).round().astype(int)
    alpha_bar = sched.alpha_bar[idx]
    alpha_bar_prev = np.concatenate(([1.0], alpha_bar[:-1]))
    alpha = alpha_bar / alpha_bar_prev
    sigma = _sigma_table(alpha, alpha_bar, kind)
    return Schedule(alpha=alpha, alpha_bar=alpha_bar, sigma=sigma,
                    beta_start=sched.beta_start, beta_end=sched.beta_end,
                    variance_kind=kind)


def _check_step(t: int, sched: Schedule) -> None:
    if not (1 <= t <= sched.steps):
        raise InvalidArgumentError(f"step {t} outside [1, {sched.steps}]")


def forward_noise(z0: Tensor, t: int, eps: Tensor, sched: Schedule) -> Tensor:
    """z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps."""
    _check_step(t, sched)
    if z0.shape != eps.shape:
        raise InvalidArgumentError("z0 and eps must share shape")
    ab = sched.alpha_bar[t - 1]
    return Tensor(np.sqrt(ab) * z0.data + np.sqrt(1.0 - ab) * eps.data)


def project_noise_free(z_t: Tensor, eps_hat: Tensor, t: int, sched: Schedule) -> Tensor:
    """Noise-free projection: (z_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t)."""
    _check_step(t, sched)
    if z_t.shape != eps_hat.shape:
        raise InvalidArgumentError("z_t and eps_hat must share shape")
    ab = sched.alpha_bar[t - 1]
    if ab <= 0.0:
        raise SingularScheduleError(f"alpha_bar at step {t} is zero")
    return Tensor((z_t.data - np.sqrt(1.0 - ab) * eps_hat.data) / np.sqrt(ab))


def reverse_step(z_t: Tensor, eps_hat: Tensor, t: int, sched: Schedule,
                 noise: Tensor | None = None) -> Tensor:
    """One ancestral reverse step with caller-supplied noise."""
    _check_step(t, sched)
    if z_t.shape != eps_hat.shape:
        raise InvalidArgumentError("z_t and eps_hat must share shape")
    a = sched.alpha[t - 1]
    ab = sched.alpha_bar[t - 1]
    mean = (z_t.data - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat.data) / np.sqrt(a)
    if noise is None:
        return Tensor(mean)
    if noise.shape != z_t.shape:
        raise InvalidArgumentError("noise must share shape with z_t")
    return Tensor(mean + sched.sigma[t - 1] * noise.data)


@dataclass(frozen=True)
class GaussianPrior:
    """Factorized N(mu0, sigma0^2) data distribution over tensor elements."""

    mu0: float
    sigma0: float

    def __post_init__(self):
        if self.sigma0 < 0:
            raise InvalidArgumentError("sigma0 must be nonnegative")


def gaussian_oracle_denoiser(prior: GaussianPrior, sched: Schedule) -> Denoiser:
    """Exact posterior-mean denoiser for a factorized Gaussian prior.

    z0_hat = (sqrt(ab) sigma0^2 z_t + (1 - ab) mu0) / (ab sigma0^2 + 1 - ab),
    eps_hat = (z_t - sqrt(ab) z0_hat) / sqrt(1 - ab).
    """
    def denoiser(z_t: Tensor, t: int, context: Mapping[str, Tensor]) -> Tensor:
        _check_step(t, sched)
        ab = sched.alpha_bar[t - 1]
        one_m = 1.0 - ab
        if one_m == 0.0:
            return Tensor(np.zeros_like(z_t.data))
        denom = ab * prior.sigma0 ** 2 + one_m
        z0_hat = (np.sqrt(ab) * prior.sigma0 ** 2 * z_t.data + one_m * prior.mu0) / denom
        return Tensor((z_t.data - np.sqrt(ab) * z0_hat) / np.sqrt(one_m))

    return denoiser


def conditional_oracle_denoiser(sigma0: float, sched: Schedule,
                                cond_key: str = "cond") -> Denoiser:
    """Posterior-mean denoiser whose per-element prior mean is a conditioning
    tensor (the clean low-resolution frame at this scale)."""
    if sigma0 < 0:
        raise InvalidArgumentError("sigma0 must be nonnegative")

    def denoiser(z_t: Tensor, t: int, context: Mapping[str, Tensor]) -> Tensor:
        _check_step(t, sched)
        cond = context[cond_key]
        if cond.shape != z_t.shape:
            raise InvalidArgumentError("conditioning tensor must share shape with z_t")
        ab = sched.alpha_bar[t - 1]
        one_m = 1.0 - ab
        if one_m == 0.0:
            return Tensor(np.zeros_like(z_t.data))
        denom = ab * sigma0 ** 2 + one_m
        z0_hat = (np.sqrt(ab) * sigma0 ** 2 * z_t.data + one_m * cond.data) / denom
        return Tensor((z_t.data - np.sqrt(ab) * z0_hat) / np.sqrt(one_m))

    return denoiser


def aligned_residual_guider(sigma0: float, sched: Schedule,
                            cond_key: str = "cond") -> Denoiser:
    """Corrective guiding path: the disagreement between the aligned adjacent
    feature and the conditional posterior-mean clean estimate.

    The residual is expressed in the units of the next latent (scaled by
    sqrt(alpha_bar_{t-1})), so a combiner scale of lambda blends the clean
    component toward the aligned neighbor by exactly lambda.
    """
    if sigma0 < 0:
        raise InvalidArgumentError("sigma0 must be nonnegative")

    def guider(z_t: Tensor, t: int, context: Mapping[str, Tensor]) -> Tensor:
        _check_step(t, sched)
        aligned = context["aligned_prev"]
        cond = context[cond_key]
        ab = sched.alpha_bar[t - 1]
        one_m = 1.0 - ab
        if one_m == 0.0:
            z0_hat = z_t.data
        else:
            denom = ab * sigma0 ** 2 + one_m
            z0_hat = (np.sqrt(ab) * sigma0 ** 2 * z_t.data + one_m * cond.data) / denom
        ab_prev = sched.alpha_bar[t - 2] if t >= 2 else 1.0
        return Tensor(np.sqrt(ab_prev) * (aligned.data - z0_hat))

    return guider


@dataclass
class GuidanceCombiner:
    """Per-channel affine map applied to the guider output; zero-initialized
    so a fresh combiner contributes exactly nothing."""

    scale: np.ndarray
    bias: np.ndarray

    @classmethod
    def zero_init(cls, channels: int) -> "GuidanceCombiner":
        return cls(scale=np.zeros(channels), bias=np.zeros(channels))

    @classmethod
    def uniform(cls, channels: int, scale: float, bias: float = 0.0) -> "GuidanceCombiner":
        return cls(scale=np.full(channels, float(scale)),
                   bias=np.full(channels, float(bias)))

    def apply(self, t: Tensor) -> Tensor:
        if len(self.scale) != t.channels or len(self.bias) != t.channels:
            raise InvalidArgumentError("combiner channel count does not match tensor")
        return Tensor(self.scale[:, None, None] * t.data + self.bias[:, None, None])


def guided_step(z_t: Tensor, x: Tensor, aligned_prev: Tensor,
                du: Denoiser, gu: Denoiser, comb: GuidanceCombiner,
                t: int, sched: Schedule, noise: Tensor | None = None,
                mode: str = "output_space") -> Tensor:
    """Guided reverse step: denoising path plus a zero-initialized corrective
    path conditioned on the aligned adjacent feature.

    ``mode`` selects where the correction enters: added to the reverse-step
    output (default) or to the predicted noise before the update.
    """
    if mode not in ("output_space", "eps_space"):
        raise InvalidArgumentError(f"unknown guidance mode {mode!r}")
    if x.shape != z_t.shape or aligned_prev.shape != z_t.shape:
        raise InvalidArgumentError("conditioning tensors must share shape with z_t")
    context = {"cond": x, "aligned_prev": aligned_prev}
    eps_hat = du(z_t, t, context)
    correction = comb.apply(gu(z_t, t, context))
    if mode == "eps_space":
        return reverse_step(z_t, Tensor(eps_hat.data + correction.data), t, sched, noise)
    base = reverse_step(z_t, eps_hat, t, sched, noise)
    return Tensor(base.data + correction.data)


def pair_directions(T: int, order: str = "forward_first") -> list[str]:
    """Guidance direction per step, steps taken from T down to 1, grouped in
    consecutive pairs."""
    if order not in ("forward_first", "backward_first"):
        raise InvalidArgumentError(f"unknown pair order {order!r}")
    first, second = (("forward", "backward") if order == "forward_first"
                     else ("backward", "forward"))
    return [first if k % 2 == 0 else second for k in range(T)]


def run_guided_sequence(frames: Sequence[Tensor], sched: Schedule,
                        du: Denoiser, gu: Denoiser, comb: GuidanceCombiner,
                        s: int, flow_cfg: FlowConfig, seed: int,
                        guidance: bool = True, order: str = "forward_first",
                        mode: str = "output_space",
                        flows_forward: Sequence[FlowField] | None = None,
                        flows_backward: Sequence[FlowField] | None = None,
                        compute_tof: bool = True,
                        ) -> tuple[list[Tensor], GuidanceRunReport]:
    """Reverse diffusion over a frame sequence with paired forward/backward
    in-step guidance.

    Steps run from T down to 1; step slots alternate direction within each
    pair.  In a forward slot, frame i is guided by the aligned noise-free
    estimate of frame i-1 from the previous step; in a backward slot, by
    frame i+1.  Boundary frames without a neighbor in the active direction
    run unguided for that step.  Precomputed flow fields may be supplied to
    skip estimation.
    """
    if len(frames) < 1:
        raise InvalidArgumentError("need at least one frame")
    T = sched.steps
    n = len(frames)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if n > 1 and guidance:
        if flows_forward is None:
            flows_forward = [prescaled_flow(frames[i - 1], frames[i], s, flow_cfg)
                             for i in range(1, n)]
        if flows_backward is None:
            flows_backward = [prescaled_flow(frames[i + 1], frames[i], s, flow_cfg)
                              for i in range(n - 1)]
    timings["flow_estimation"] = time.perf_counter() - t0

    rng = np.random.default_rng(seed)
    shape = frames[0].shape
    z = [Tensor(rng.standard_normal(shape)) for _ in range(n)]
    directions = pair_directions(T, order=order)

    t0 = time.perf_counter()
    # Guiding information for the first step comes from the initial latents.
    zhat = [project_noise_free(z[i], du(z[i], T, {"cond": frames[i]}), T, sched)
            for i in range(n)]
    for k, t in enumerate(range(T, 0, -1)):
        direction = directions[k]
        noises = [Tensor(rng.standard_normal(shape)) for _ in range(n)]
        new_z: list[Tensor] = []
        for i in range(n):
            neighbor = i - 1 if direction == "forward" else i + 1
            use_guidance = guidance and 0 <= neighbor < n
            if use_guidance:
                if direction == "forward":
                    flow_hr = flows_forward[i - 1]
                else:
                    flow_hr = flows_backward[i]
                aligned = ogwm_align(zhat[neighbor], flow_hr, s)
                new_z.append(guided_step(z[i], frames[i], aligned, du, gu, comb,
                                         t, sched, noises[i], mode=mode))
            else:
                eps_hat = du(z[i], t, {"cond": frames[i]})
                new_z.append(reverse_step(z[i], eps_hat, t, sched, noises[i]))
        z = new_z
        if t > 1:
            zhat = [project_noise_free(z[i], du(z[i], t - 1, {"cond": frames[i]}),
                                       t - 1, sched) for i in range(n)]
    timings["reverse_chain"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tof_value = float("nan")
    if compute_tof and n > 1:
        tof_value = tof(z, list(frames), flow_cfg)
    timings["tof"] = time.perf_counter() - t0

    stats = [FrameStats(mean=float(zi.data.mean()), std=float(zi.data.std()),
                        minimum=float(zi.data.min()), maximum=float(zi.data.max()))
             for zi in z]
    report = GuidanceRunReport(
        directions=directions,
        forward_count=directions.count("forward"),
        backward_count=directions.count("backward"),
        per_frame_stats=stats,
        tof_output_vs_reference=tof_value,
        guidance_enabled=bool(guidance),
        seed=int(seed),
        steps=int(T),
        scale=int(s),
        timings_seconds=timings,
    )
    return z, report
