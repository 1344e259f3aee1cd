"""FastAPI service exposing the experiment layer.

Run with ``uvicorn warpdiff.api:app``.  Requests carry a fully resolved
experiment configuration; responses are the same report envelopes the CLI
writes to disk.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from . import experiments
from .errors import WarpdiffError
from .experiments import ExperimentConfig

from .synth import SyntheticParams, generate_synthetic_sequence
from .tensor import save_image


class SyntheticRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str = "translate"
    frames: int = 5
    size: int = 128
    shift: tuple[float, float] = (3.0, 0.0)
    angle_deg: float = 2.0
    seed: int = 0
    out_dir: Optional[str] = None


class SyntheticResponse(BaseModel):
    frames: int
    height: int
    width: int
    paths: list[str]


def _run(runner, cfg: ExperimentConfig) -> dict:
    try:
        env = runner(cfg)
    except (WarpdiffError, OSError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return json.loads(experiments.envelope_json(env))


def create_app() -> FastAPI:
    app = FastAPI(title="warpdiff", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/experiments/correlation")
    def correlation(cfg: ExperimentConfig) -> dict:
        return _run(experiments.run_correlation, cfg)

    @app.post("/experiments/frequency")
    def frequency(cfg: ExperimentConfig) -> dict:
        return _run(experiments.run_frequency, cfg)

    @app.post("/experiments/rescaling-sweep")
    def rescaling_sweep(cfg: ExperimentConfig) -> dict:
        return _run(experiments.run_rescaling_sweep, cfg)

    @app.post("/experiments/guidance")
    def guidance(cfg: ExperimentConfig) -> dict:
        return _run(experiments.run_guidance, cfg)

    @app.post("/synthetic")
    def synthetic(req: SyntheticRequest) -> SyntheticResponse:
        try:
            params = SyntheticParams(frames=req.frames, height=req.size,
                                     width=req.size, shift=req.shift,
                                     angle_deg=req.angle_deg)
            seq = generate_synthetic_sequence(req.kind, params, req.seed)
            paths: list[str] = []
            if req.out_dir:
                out_dir = Path(req.out_dir)
                out_dir.mkdir(parents=True, exist_ok=True)
                for i, frame in enumerate(seq):
                    p = out_dir / f"frame_{i:03d}.png"
                    save_image(frame, p)
                    paths.append(str(p))
        except (WarpdiffError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return SyntheticResponse(frames=len(seq), height=seq[0].height,
                                 width=seq[0].width, paths=paths)

    return app


app = create_app()
