"""Experiment orchestration: configuration, frame loading, flow caching, and
report emission for the three experiment families (correlation profile,
alignment comparison, guided-diffusion run)."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from . import corr, diffusion, freq
from .errors import InvalidArgumentError
from .flow import FlowConfig, FlowField, prescaled_flow
from .reports import (GuidanceExperimentReport, ReportEnvelope, flatten_for_csv)
from .synth import SyntheticParams, generate_synthetic_sequence
from .tensor import Tensor, load_image, load_raw

FRAME_SUFFIXES = (".png", ".pgm", ".wdt")


class FlowSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pyramid_levels: int = 3
    iterations: int = 5
    window_radius: int = 10
    estimator: str = "lucas_kanade_pyramidal"

    def to_config(self) -> FlowConfig:
        return FlowConfig(pyramid_levels=self.pyramid_levels,
                          iterations=self.iterations,
                          window_radius=self.window_radius,
                          estimator=self.estimator)


class ScheduleSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train_steps: int = 1000
    sample_steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    variance_kind: str = "beta_tilde"

    def build(self) -> diffusion.Schedule:
        full = diffusion.build_schedule(self.train_steps, self.beta_start,
                                        self.beta_end, self.variance_kind)
        if self.sample_steps == self.train_steps:
            return full
        return diffusion.respace(full, self.sample_steps)


class ExperimentConfig(BaseModel):
    """Fully resolved settings for one experiment run."""

    model_config = ConfigDict(extra="forbid")

    input_dir: Optional[str] = None
    synthetic_kind: Optional[str] = None
    synthetic_frames: int = 5
    synthetic_size: int = 128
    synthetic_shift: tuple[float, float] = (3.0, 0.0)
    synthetic_angle_deg: float = 2.0
    scale: int = 4
    sweep_scales: list[int] = Field(default_factory=lambda: [1, 2, 4])
    flow: FlowSettings = Field(default_factory=FlowSettings)
    schedule: ScheduleSettings = Field(default_factory=ScheduleSettings)
    operators: list[str] = Field(default_factory=lambda: list(freq.EDGE_KINDS))
    highpass_radius: float = 30.0
    bins: int = 256
    seed: int = 0
    guidance: bool = True
    guidance_scale: float = 0.3
    prior_sigma: float = 0.5
    threads: int = 1


def load_frames(directory) -> list[Tensor]:
    """Load a frame sequence in lexicographic filename order (zero-padded
    indices expected)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidArgumentError(f"not a directory: {directory}")
    paths = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in FRAME_SUFFIXES)
    if not paths:
        raise InvalidArgumentError(f"no frames found in {directory}")
    return [load_raw(p) if p.suffix.lower() == ".wdt" else load_image(p)
            for p in paths]


def resolve_frames(cfg: ExperimentConfig) -> list[Tensor]:
    """Frames from the input directory, or from the synthetic generator when
    a kind is configured instead."""
    if cfg.input_dir is not None:
        return load_frames(cfg.input_dir)
    if cfg.synthetic_kind is not None:
        params = SyntheticParams(frames=cfg.synthetic_frames,
                                 height=cfg.synthetic_size,
                                 width=cfg.synthetic_size,
                                 shift=cfg.synthetic_shift,
                                 angle_deg=cfg.synthetic_angle_deg)
        return generate_synthetic_sequence(cfg.synthetic_kind, params, cfg.seed)
    raise InvalidArgumentError("config needs an input directory or a synthetic kind")


def _edge_operators(cfg: ExperimentConfig) -> list[freq.EdgeOperator]:
    return [freq.EdgeOperator(kind=k) for k in cfg.operators]


def forward_pair_flows(frames: Sequence[Tensor], s: int, flow_cfg: FlowConfig,
                       threads: int = 1) -> list[FlowField]:
    """High-resolution backward fields warping frame i toward frame i + 1."""
    pairs = [(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda p: prescaled_flow(p[0], p[1], s, flow_cfg), pairs))
    return [prescaled_flow(ref, tgt, s, flow_cfg) for ref, tgt in pairs]


def _derived_flows(flows_hi: Sequence[FlowField], s_hi: int, s: int) -> list[FlowField]:
    """Rescale a high-factor flow estimate to a lower factor so all sweep
    entries share one motion estimate."""
    if s == s_hi:
        return list(flows_hi)
    if s_hi % s:
        raise InvalidArgumentError(f"sweep factors must divide the largest ({s_hi})")
    k = s_hi // s
    return [FlowField(u=f.u[::k, ::k] * (s / s_hi), v=f.v[::k, ::k] * (s / s_hi))
            for f in flows_hi]


def run_correlation(cfg: ExperimentConfig) -> ReportEnvelope:
    frames = resolve_frames(cfg)
    report = corr.correlation_profile(frames, bins=cfg.bins)
    return _envelope("correlation", cfg, report.model_dump())


def run_frequency(cfg: ExperimentConfig) -> ReportEnvelope:
    frames = resolve_frames(cfg)
    flows = forward_pair_flows(frames, cfg.scale, cfg.flow.to_config(), cfg.threads)
    report = freq.alignment_report(frames, flows, cfg.scale,
                                   ops=_edge_operators(cfg),
                                   radius=cfg.highpass_radius)
    return _envelope("frequency", cfg, report.model_dump())


def run_rescaling_sweep(cfg: ExperimentConfig) -> ReportEnvelope:
    if not cfg.sweep_scales:
        raise InvalidArgumentError("sweep_scales must be nonempty")
    frames = resolve_frames(cfg)
    s_hi = max(cfg.sweep_scales)
    flows_hi = forward_pair_flows(frames, s_hi, cfg.flow.to_config(), cfg.threads)
    flows_per_s = {s: _derived_flows(flows_hi, s_hi, s) for s in cfg.sweep_scales}
    report = freq.rescaling_sweep(frames, flows_per_s, cfg.sweep_scales,
                                  ops=_edge_operators(cfg),
                                  radius=cfg.highpass_radius)
    return _envelope("rescaling_sweep", cfg, report.model_dump())


def run_guidance(cfg: ExperimentConfig) -> ReportEnvelope:
    frames = resolve_frames(cfg)
    sched = cfg.schedule.build()
    flow_cfg = cfg.flow.to_config()
    du = diffusion.conditional_oracle_denoiser(cfg.prior_sigma, sched)
    gu = diffusion.aligned_residual_guider(cfg.prior_sigma, sched)
    channels = frames[0].channels

    _, unguided = diffusion.run_guided_sequence(
        frames, sched, du, gu, diffusion.GuidanceCombiner.zero_init(channels),
        cfg.scale, flow_cfg, cfg.seed, guidance=False)
    guided = None
    if cfg.guidance:
        comb = diffusion.GuidanceCombiner.uniform(channels, cfg.guidance_scale)
        _, guided = diffusion.run_guided_sequence(
            frames, sched, du, gu, comb, cfg.scale, flow_cfg, cfg.seed,
            guidance=True)
    report = GuidanceExperimentReport(guided=guided, unguided=unguided)
    return _envelope("guidance", cfg, report.model_dump())


def _envelope(kind: str, cfg: ExperimentConfig, report: dict) -> ReportEnvelope:
    return ReportEnvelope(kind=kind, config=cfg.model_dump(), seed=cfg.seed,
                          report=report)


def _strip_timings(obj):
    if isinstance(obj, dict):
        return {k: _strip_timings(v) for k, v in obj.items() if k != "timings_seconds"}
    if isinstance(obj, list):
        return [_strip_timings(v) for v in obj]
    return obj


def envelope_json(env: ReportEnvelope, include_timings: bool = False) -> str:
    """Deterministic JSON serialization; timings excluded unless asked for,
    so fixed-seed reruns are byte-identical."""
    payload = env.model_dump()
    if not include_timings:
        payload = _strip_timings(payload)
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_report(env: ReportEnvelope, out_json, include_timings: bool = False) -> None:
    """Write the JSON report plus a flattened CSV mirror next to it."""
    out_json = Path(out_json)
    out_json.parent.mkdir(parents=True, exist_ok=True)
    text = envelope_json(env, include_timings=include_timings)
    out_json.write_text(text)
    rows = flatten_for_csv(json.loads(text))
    with open(out_json.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        writer.writerows(rows)


def load_config_file(path) -> dict:
    """Parse a ``key = value`` config file into ExperimentConfig field values.

    Values are JSON-decoded when possible, otherwise taken as strings.
    Lines starting with ``#`` and blank lines are ignored.
    """
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        raw = raw.strip()
        try:
            values[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            values[key.strip()] = raw
    return values
