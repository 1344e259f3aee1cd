"""Command-line interface: thin wrappers over the experiment layer."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from . import experiments
from .errors import WarpdiffError
from .experiments import ExperimentConfig
from .flow import estimate_flow, prescaled_flow, read_flo, write_flo
from .synth import SyntheticParams, generate_synthetic_sequence
from .tensor import load_image, save_image
from .warp import ogwm_align, warp_direct


def _fail(stage: str, exc: Exception) -> None:
    click.echo(f"error [{stage}]: {exc}", err=True)
    sys.exit(1)


def _base_config(ctx: click.Context, **overrides) -> ExperimentConfig:
    values = dict(ctx.obj.get("config_file", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    values.setdefault("seed", ctx.obj["seed"])
    values.setdefault("threads", ctx.obj["threads"])
    return ExperimentConfig(**values)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for every stochastic stage.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads for per-pair flow estimation.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="key = value config file with defaults.")
@click.option("--timings/--no-timings", default=False,
              help="Include wall-clock timings in reports (breaks byte-identical reruns).")
@click.pass_context
def main(ctx, seed, threads, config_path, timings):
    """Flow-guided alignment and guided-diffusion experiment toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["threads"] = threads
    ctx.obj["timings"] = timings
    ctx.obj["config_file"] = (
        experiments.load_config_file(config_path) if config_path else {}
    )


def _emit(ctx, env, out) -> None:
    experiments.write_report(env, out, include_timings=ctx.obj["timings"])
    click.echo(f"wrote {out}")


@main.command("analyze-correlation")
@click.option("--input", "input_dir", type=click.Path(), default=None,
              help="Directory of frames (lexicographic order).")
@click.option("--bins", type=int, default=None, help="Histogram bins for cross-entropy.")
@click.option("--out", type=click.Path(), default="correlation.json", show_default=True)
@click.pass_context
def analyze_correlation(ctx, input_dir, bins, out):
    """Adjacent-pair SSIM / PSNR / F(H) / F(sigma) profile."""
    try:
        cfg = _base_config(ctx, input_dir=input_dir, bins=bins)
        env = experiments.run_correlation(cfg)
    except (WarpdiffError, OSError) as exc:
        _fail("correlation", exc)
    _emit(ctx, env, out)


@main.command("analyze-frequency")
@click.option("--input", "input_dir", type=click.Path(), default=None)
@click.option("--scale", type=int, default=None, help="Rescaling factor s.")
@click.option("--radius", type=float, default=None, help="High-pass radius.")
@click.option("--operators", default=None,
              help="Comma-separated edge operators (canny,sobel,laplacian).")
@click.option("--out", type=click.Path(), default="frequency.json", show_default=True)
@click.pass_context
def analyze_frequency(ctx, input_dir, scale, radius, operators, out):
    """Alignment-arm edge/high-pass comparison over a sequence."""
    try:
        ops = operators.split(",") if operators else None
        cfg = _base_config(ctx, input_dir=input_dir, scale=scale,
                           highpass_radius=radius, operators=ops)
        env = experiments.run_frequency(cfg)
    except (WarpdiffError, OSError) as exc:
        _fail("frequency", exc)
    _emit(ctx, env, out)


@main.command("rescaling-sweep")
@click.option("--input", "input_dir", type=click.Path(), default=None)
@click.option("--scales", default=None, help="Comma-separated factors, e.g. 1,2,4.")
@click.option("--radius", type=float, default=None)
@click.option("--out", type=click.Path(), default="sweep.json", show_default=True)
@click.pass_context
def rescaling_sweep_cmd(ctx, input_dir, scales, radius, out):
    """Alignment report per rescaling factor."""
    try:
        svals = [int(s) for s in scales.split(",")] if scales else None
        cfg = _base_config(ctx, input_dir=input_dir, sweep_scales=svals,
                           highpass_radius=radius)
        env = experiments.run_rescaling_sweep(cfg)
    except (WarpdiffError, OSError) as exc:
        _fail("rescaling-sweep", exc)
    _emit(ctx, env, out)


@main.command("flow")
@click.argument("reference", type=click.Path(exists=True))
@click.argument("target", type=click.Path(exists=True))
@click.option("--scale", type=int, default=1, show_default=True,
              help="Pre-upscaling factor before estimation.")
@click.option("--estimator", default="lucas_kanade_pyramidal", show_default=True)
@click.option("--out", type=click.Path(), default="flow.flo", show_default=True)
@click.pass_context
def flow_cmd(ctx, reference, target, scale, estimator, out):
    """Estimate backward flow between two frames, write Middlebury .flo."""
    try:
        cfg = experiments.FlowSettings(estimator=estimator).to_config()
        ref = load_image(reference)
        tgt = load_image(target)
        field = (prescaled_flow(ref, tgt, scale, cfg) if scale > 1
                 else estimate_flow(ref, tgt, cfg))
        write_flo(field, out)
    except (WarpdiffError, OSError) as exc:
        _fail("flow", exc)
    click.echo(f"wrote {out}")


@main.command("warp")
@click.argument("source", type=click.Path(exists=True))
@click.argument("flow_file", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["direct", "ogwm"]), default="direct",
              show_default=True)
@click.option("--scale", type=int, default=4, show_default=True,
              help="Rescaling factor for ogwm mode.")
@click.option("--border", type=click.Choice(["clamp", "zero"]), default="clamp",
              show_default=True)
@click.option("--out", type=click.Path(), default="warped.png", show_default=True)
@click.pass_context
def warp_cmd(ctx, source, flow_file, mode, scale, border, out):
    """Warp an image with a flow field (native or upscale-warp-downscale)."""
    try:
        src = load_image(source)
        field = read_flo(flow_file)
        if mode == "direct":
            result = warp_direct(src, field, border=border)
        else:
            result = ogwm_align(src, field, scale, border=border)
        save_image(result, out)
    except (WarpdiffError, OSError) as exc:
        _fail("warp", exc)
    click.echo(f"wrote {out}")


@main.command("simulate-guidance")
@click.option("--frames", "input_dir", type=click.Path(), default=None,
              help="Directory of conditioning frames.")
@click.option("--steps", type=int, default=None, help="Sampling steps.")
@click.option("--scale", type=int, default=None)
@click.option("--guidance", type=click.Choice(["on", "off"]), default="on",
              show_default=True)
@click.option("--guidance-scale", type=float, default=None)
@click.option("--out", type=click.Path(), default="run.json", show_default=True)
@click.pass_context
def simulate_guidance(ctx, input_dir, steps, scale, guidance, guidance_scale, out):
    """Guided vs unguided reverse-diffusion run over a frame sequence."""
    try:
        overrides = {"input_dir": input_dir, "scale": scale,
                     "guidance": guidance == "on",
                     "guidance_scale": guidance_scale}
        cfg = _base_config(ctx, **overrides)
        if steps is not None:
            cfg = cfg.model_copy(update={
                "schedule": cfg.schedule.model_copy(update={"sample_steps": steps})})
        env = experiments.run_guidance(cfg)
    except (WarpdiffError, OSError) as exc:
        _fail("simulate-guidance", exc)
    _emit(ctx, env, out)


@main.command("gen-synthetic")
@click.option("--kind", type=click.Choice(["translate", "rotate", "textured_noise"]),
              default="translate", show_default=True)
@click.option("--frames", type=int, default=5, show_default=True)
@click.option("--size", type=int, default=128, show_default=True)
@click.option("--shift", default="3,0", show_default=True,
              help="dx,dy pixels per frame (translate kind).")
@click.option("--angle", type=float, default=2.0, show_default=True,
              help="Degrees per frame (rotate kind).")
@click.option("--out", type=click.Path(), default="synthetic", show_default=True,
              help="Output directory for PNG frames.")
@click.pass_context
def gen_synthetic(ctx, kind, frames, size, shift, angle, out):
    """Write a deterministic synthetic sequence with known motion."""
    try:
        dx, dy = (float(x) for x in shift.split(","))
        params = SyntheticParams(frames=frames, height=size, width=size,
                                 shift=(dx, dy), angle_deg=angle)
        seq = generate_synthetic_sequence(kind, params, ctx.obj["seed"])
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(seq):
            save_image(frame, out_dir / f"frame_{i:03d}.png")
    except (WarpdiffError, OSError, ValueError) as exc:
        _fail("gen-synthetic", exc)
    click.echo(f"wrote {len(seq)} frames to {out}")


if __name__ == "__main__":
    main()
