"""Serializable experiment reports (pydantic models) and JSON/CSV emission."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict


class ArmMetrics(BaseModel):
    """High-frequency measurements for one alignment arm."""

    edge_strength: dict[str, float]  # operator name -> mean strength
    highpass_strength: float


class FrequencyReport(BaseModel):
    """Alignment-strategy comparison: original vs direct warp vs rescaled warp."""

    model_config = ConfigDict(extra="forbid")

    arms: dict[str, ArmMetrics]
    edge_reduction_percent: dict[str, dict[str, float]]  # operator -> arm -> %
    highpass_reduction_percent: dict[str, float]  # arm -> %
    scale: int
    highpass_radius: float
    pair_count: int
    per_step: Optional[list["FrequencyReport"]] = None


class CorrelationReport(BaseModel):
    """Adjacent-pair correlation summary for one sequence."""

    model_config = ConfigDict(extra="forbid")

    mean_ssim: float
    mean_psnr_db: float
    mean_f_entropy: float
    mean_f_sigma: float
    pair_count: int
    domain: str = "pixel"
    sigma_mode: str = "per_variable"


class FrameStats(BaseModel):
    mean: float
    std: float
    minimum: float
    maximum: float


class GuidanceRunReport(BaseModel):
    """Outcome of one guided (or unguided) reverse-diffusion run."""

    model_config = ConfigDict(extra="forbid")

    directions: list[str]
    forward_count: int
    backward_count: int
    per_frame_stats: list[FrameStats]
    tof_output_vs_reference: float
    guidance_enabled: bool
    seed: int
    steps: int
    scale: int
    # Wall-clock timings are informational only and excluded from the
    # canonical serialization so fixed-seed runs stay byte-identical.
    timings_seconds: Optional[dict[str, float]] = None


class GuidanceExperimentReport(BaseModel):
    """Guided and unguided runs over the same frames and noise stream."""

    model_config = ConfigDict(extra="forbid")

    guided: Optional[GuidanceRunReport] = None
    unguided: GuidanceRunReport


class SweepEntry(BaseModel):
    scale: int
    report: FrequencyReport


class SweepReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    entries: list[SweepEntry]


class ReportEnvelope(BaseModel):
    """Report plus the fully resolved configuration that produced it."""

    model_config = ConfigDict(extra="forbid")

    kind: str
    config: dict
    seed: Optional[int] = None
    report: dict


def canonical_json(model: BaseModel, *, include_timings: bool = False) -> str:
    """Deterministic JSON for a report model.

    Timings are dropped unless requested, so identical configs and seeds
    produce byte-identical files.
    """
    exclude = None if include_timings else {"timings_seconds"}
    data = model.model_dump_json(indent=2, exclude=exclude)
    return data + "\n"


def flatten_for_csv(payload: dict, prefix: str = "") -> list[tuple[str, str]]:
    """Flatten a nested report dict into (dotted.key, value) rows."""
    rows: list[tuple[str, str]] = []
    for key, value in payload.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            rows.extend(flatten_for_csv(value, name))
        elif isinstance(value, (list, tuple)):
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    rows.extend(flatten_for_csv(item, f"{name}[{i}]"))
                else:
                    rows.append((f"{name}[{i}]", repr(item)))
        else:
            rows.append((name, repr(value)))
    return rows
