"""Command line interface.

Subcommands: ``upscale``, ``metrics``, ``degrade``, ``profile``,
``flow-check``. Each accepts ``--config FILE`` (a flat JSON object whose keys
mirror the long flag names with underscores); explicit flags override config
values. Results go to stdout as JSON; failures print a JSON object
``{"code", "message", "context"}`` on stderr and exit 1 (2 for usage errors).

Thread count resolution: ``--threads`` flag, else the ``UAV_THREADS``
environment variable, else the CPU count. Outputs are bitwise independent of
the thread count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import metrics as metrics_mod
from .degrade import degrade
from .errors import InvalidParameter, LatentVsrError, MissingFlow, UsageError
from .flow import (
    FlowPair,
    consistency_error,
    displaced_out_of_bounds,
    synth_flow,
    validity_mask,
)
from .propagate import PropagationConfig
from .sampler import (
    SamplerConfig,
    as_conditioning_latent,
    oracle_denoiser,
    procedural_denoiser,
    sample,
)
from .schedule import Condition, make_schedule, prompt_embedding_from_seed
from .tensorio import (
    FlowField,
    quantize_to_u8,
    read_flow,
    read_frame_sequence,
    write_frame_sequence,
)

ENV_THREADS = "UAV_THREADS"

# CLI defaults for the procedural denoiser; the library default for
# trajectory_weight is 0, but a pipeline whose propagation should reach the
# output needs the estimate to track the trajectory.
PROCEDURAL_DETAIL_GAIN = 1.0
PROCEDURAL_TRAJECTORY_WEIGHT = 0.9


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as JSON on stderr."""

    def error(self, message):
        raise UsageError(message)


def _emit_error(err: LatentVsrError) -> None:
    doc = {"code": err.code, "message": err.message, "context": err.context}
    print(json.dumps(doc), file=sys.stderr)


def _print_json(doc: dict) -> None:
    print(json.dumps(doc, indent=2))


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return doc


def _resolve(args, config: dict, key: str, default):
    """Flag value if given, else config value, else default."""
    flag = getattr(args, key)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _resolve_threads(args, config: dict) -> int:
    threads = _resolve(args, config, "threads", None)
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        if env is not None:
            try:
                threads = int(env)
            except ValueError as exc:
                raise UsageError(f"{ENV_THREADS} must be an integer, got {env!r}") from exc
        else:
            threads = os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise UsageError(f"threads must be >= 1, got {threads}")
    return threads


def _parse_positions(value) -> frozenset[int]:
    if value is None:
        return frozenset()
    if isinstance(value, (list, tuple)):
        return frozenset(int(p) for p in value)
    text = str(value).strip()
    if not text or text == "none":
        return frozenset()
    try:
        return frozenset(int(p) for p in text.split(","))
    except ValueError as exc:
        raise UsageError(f"cannot parse positions {value!r}: {exc}") from exc


def _load_flows(flow_dir: str, num_frames: int) -> list[FlowPair]:
    pairs = []
    for i in range(num_frames - 1):
        fwd_path = os.path.join(flow_dir, f"fwd_{i:04d}.flo")
        bwd_path = os.path.join(flow_dir, f"bwd_{i:04d}.flo")
        for p in (fwd_path, bwd_path):
            if not os.path.isfile(p):
                raise MissingFlow(f"missing flow file: {p}", path=p)
        fwd = read_flow(fwd_path)
        bwd = read_flow(bwd_path)
        pairs.append(
            FlowPair(
                forward=FlowField(fwd.vectors, "forward", i, i + 1),
                backward=FlowField(bwd.vectors, "backward", i + 1, i),
            )
        )
    return pairs


def _zero_flows(num_frames: int, height: int, width: int) -> list[FlowPair]:
    zero = np.zeros((2, height, width), dtype=np.float32)
    return [
        FlowPair(
            forward=FlowField(zero, "forward", i, i + 1),
            backward=FlowField(zero, "backward", i + 1, i),
        )
        for i in range(num_frames - 1)
    ]


# --- subcommands -------------------------------------------------------------


def _cmd_upscale(args) -> dict:
    config = _load_config(args.config)
    video = read_frame_sequence(args.input)

    steps = int(_resolve(args, config, "steps", 30))
    tstar = _parse_positions(_resolve(args, config, "tstar", None))
    schedule = make_schedule(
        kind=_resolve(args, config, "schedule_kind", "scaled_linear"),
        t_train=int(_resolve(args, config, "t_train", 1000)),
        beta_start=_resolve(args, config, "beta_start", None),
        beta_end=_resolve(args, config, "beta_end", None),
        num_inference_steps=steps,
        propagation_positions=tstar,
    )

    prompt_seed = _resolve(args, config, "prompt_seed", None)
    condition = Condition(
        prompt_embedding=(
            None if prompt_seed is None
            else prompt_embedding_from_seed(int(prompt_seed))
        ),
        noise_level=int(_resolve(args, config, "noise_level", 0)),
        guidance_scale=float(_resolve(args, config, "guidance_scale", 1.0)),
    )
    propagation = PropagationConfig(
        beta=float(_resolve(args, config, "beta", 0.5)),
        delta=float(_resolve(args, config, "delta", 1.0)),
    )
    color_fix = _resolve(args, config, "color_fix", None)
    sampler_config = SamplerConfig(
        schedule=schedule,
        condition=condition,
        propagation=propagation,
        tile_size=int(_resolve(args, config, "tile", 80)),
        tile_overlap=int(_resolve(args, config, "tile_overlap", 16)),
        segment_len=int(_resolve(args, config, "segment", 8)),
        segment_overlap=int(_resolve(args, config, "segment_overlap", 2)),
        rng_seed=int(_resolve(args, config, "seed", 0)),
        # zeros keeps the restoration-biased toy denoiser clean; noise init
        # adds generative texture at the cost of fidelity
        init_latent=_resolve(args, config, "init", "zeros"),
        threads=_resolve_threads(args, config),
        color_fix_levels=None if color_fix is None else int(color_fix),
    )

    flow_dir = _resolve(args, config, "flows", None)
    if flow_dir is not None:
        flows = _load_flows(flow_dir, video.num_frames)
    else:
        flows = _zero_flows(video.num_frames, video.height, video.width)

    name = _resolve(args, config, "denoiser", "procedural")
    if name == "oracle":
        denoiser = oracle_denoiser(as_conditioning_latent(video), schedule)
    elif name == "procedural":
        denoiser = procedural_denoiser(
            schedule,
            float(_resolve(args, config, "detail_gain", PROCEDURAL_DETAIL_GAIN)),
            trajectory_weight=float(
                _resolve(args, config, "trajectory_weight",
                         PROCEDURAL_TRAJECTORY_WEIGHT)
            ),
            seed=sampler_config.rng_seed,
        )
    else:
        raise UsageError(f"unknown denoiser {name!r} (expected oracle|procedural)")

    out = sample(video, denoiser, sampler_config, flows)
    manifest = write_frame_sequence(out, args.output)
    return {
        "output_manifest": manifest,
        "frames": out.num_frames,
        "height": out.height,
        "width": out.width,
        "steps": steps,
        "tstar": sorted(tstar),
        "seed": sampler_config.rng_seed,
        "denoiser": name,
    }


def _cmd_metrics(args) -> dict:
    config = _load_config(args.config)
    ref = read_frame_sequence(args.ref)
    test = read_frame_sequence(args.test)
    flow_dir = _resolve(args, config, "flows", None)
    flows = None
    if flow_dir is not None:
        flows = _load_flows(flow_dir, test.num_frames)
    delta = float(_resolve(args, config, "delta", 1.0))
    report = metrics_mod.compute_report(ref, test, flows=flows, delta=delta)
    doc = report.to_dict()
    row = _resolve(args, config, "profile_row", None)
    if row is not None:
        out_dir = _resolve(args, config, "profile_out", None)
        if out_dir is None:
            raise UsageError("--profile-row requires --profile-out")
        os.makedirs(out_dir, exist_ok=True)
        from PIL import Image

        paths = {}
        for label, vid in (("ref", ref), ("test", test)):
            profile = metrics_mod.temporal_profile(vid, int(row))
            path = os.path.join(out_dir, f"profile_{label}.png")
            Image.fromarray(
                quantize_to_u8(np.transpose(profile, (2, 0, 1))).transpose(1, 2, 0)
            ).save(path)
            paths[label] = path
        doc["profiles"] = paths
    return doc


def _cmd_degrade(args) -> dict:
    config = _load_config(args.config)
    video = read_frame_sequence(args.input)
    out = degrade(
        video,
        blur_sigma=float(_resolve(args, config, "blur_sigma", 1.5)),
        scale=int(_resolve(args, config, "scale", 4)),
        noise_sigma=float(_resolve(args, config, "noise_sigma", 0.05)),
        seed=int(_resolve(args, config, "seed", 0)),
    )
    manifest = write_frame_sequence(out, args.output)
    return {
        "output_manifest": manifest,
        "frames": out.num_frames,
        "height": out.height,
        "width": out.width,
    }


def _cmd_profile(args) -> dict:
    video = read_frame_sequence(args.input)
    profile = metrics_mod.temporal_profile(video, args.row)
    from PIL import Image

    Image.fromarray(
        quantize_to_u8(np.transpose(profile, (2, 0, 1))).transpose(1, 2, 0)
    ).save(args.out)
    return {"out": args.out, "rows": profile.shape[0], "width": profile.shape[1]}


def _parse_motion(text: str, size: str) -> tuple:
    try:
        h, w = (int(v) for v in size.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"--size must look like 16x16, got {size!r}") from exc
    kind, _, params = text.partition(":")
    values = [float(v) for v in params.split(",")] if params else []
    if kind == "translate":
        dx, dy = (values + [0.0, 0.0])[:2]
        return synth_flow("translate", (h, w), dx=dx, dy=dy)
    if kind == "rotate":
        return synth_flow("rotate", (h, w), angle=values[0] if values else 0.0)
    if kind == "zoom":
        return synth_flow("zoom", (h, w), scale=values[0] if values else 1.0)
    raise UsageError(f"unknown motion {kind!r} (translate|rotate|zoom)")


def _cmd_flow_check(args) -> dict:
    if args.synth is not None:
        if args.fwd or args.bwd:
            raise UsageError("--synth replaces --fwd/--bwd")
        pair = _parse_motion(args.synth, args.size)
        fwd, bwd = pair.forward, pair.backward
    else:
        if not (args.fwd and args.bwd):
            raise UsageError("flow-check needs --fwd and --bwd, or --synth")
        fwd = read_flow(args.fwd)
        bwd = read_flow(args.bwd)
    if fwd.spatial_shape != bwd.spatial_shape:
        raise InvalidParameter(
            f"flow dims differ: {fwd.spatial_shape} vs {bwd.spatial_shape}"
        )
    error = consistency_error(fwd, bwd)
    oob = displaced_out_of_bounds(fwd)
    mask = validity_mask(error, args.delta, out_of_bounds=oob).mask
    return {
        "max_error": float(error.max()),
        "mean_error": float(error.mean()),
        "valid_fraction": float(mask.mean()),
        "oob_fraction": float(oob.mean()),
        "delta": args.delta,
    }


# --- parser ---------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="latentvsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    up = sub.add_parser("upscale", help="x4-upscale a frame sequence")
    up.add_argument("--input", required=True, help="input manifest path")
    up.add_argument("--output", required=True, help="output directory")
    up.add_argument("--config", help="JSON config file mirroring the flags")
    up.add_argument("--flows", help="directory of fwd_NNNN.flo / bwd_NNNN.flo pairs")
    up.add_argument("--denoiser", choices=["oracle", "procedural"])
    up.add_argument("--steps", type=int)
    up.add_argument("--tstar", help="comma-separated propagation positions")
    up.add_argument("--beta", type=float, help="propagation fusion weight")
    up.add_argument("--delta", type=float, help="flow consistency threshold")
    up.add_argument("--noise-level", dest="noise_level", type=int)
    up.add_argument("--prompt-seed", dest="prompt_seed", type=int)
    up.add_argument("--guidance-scale", dest="guidance_scale", type=float)
    up.add_argument("--tile", type=int)
    up.add_argument("--tile-overlap", dest="tile_overlap", type=int)
    up.add_argument("--segment", type=int)
    up.add_argument("--segment-overlap", dest="segment_overlap", type=int)
    up.add_argument("--color-fix", dest="color_fix", type=int, nargs="?", const=5)
    up.add_argument("--seed", type=int)
    up.add_argument("--threads", type=int)
    up.add_argument("--schedule-kind", dest="schedule_kind",
                    choices=["linear", "scaled_linear"])
    up.add_argument("--t-train", dest="t_train", type=int)
    up.add_argument("--beta-start", dest="beta_start", type=float)
    up.add_argument("--beta-end", dest="beta_end", type=float)
    up.add_argument("--detail-gain", dest="detail_gain", type=float)
    up.add_argument("--trajectory-weight", dest="trajectory_weight", type=float)
    up.add_argument("--init", choices=["noise", "zeros"],
                    help="initial latent (default zeros)")
    up.set_defaults(func=_cmd_upscale)

    me = sub.add_parser("metrics", help="PSNR/SSIM/E_warp report")
    me.add_argument("--ref", required=True, help="reference manifest")
    me.add_argument("--test", required=True, help="test manifest")
    me.add_argument("--config", help="JSON config file")
    me.add_argument("--flows", help="flow directory for E_warp")
    me.add_argument("--delta", type=float)
    me.add_argument("--profile-row", dest="profile_row", type=int)
    me.add_argument("--profile-out", dest="profile_out")
    me.set_defaults(func=_cmd_metrics)

    de = sub.add_parser("degrade", help="synthesize a degraded LQ sequence")
    de.add_argument("--input", required=True)
    de.add_argument("--output", required=True)
    de.add_argument("--config", help="JSON config file")
    de.add_argument("--blur-sigma", dest="blur_sigma", type=float)
    de.add_argument("--scale", type=int)
    de.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    de.add_argument("--seed", type=int)
    de.set_defaults(func=_cmd_degrade)

    pr = sub.add_parser("profile", help="write a temporal-profile image")
    pr.add_argument("--input", required=True)
    pr.add_argument("--row", type=int, required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_cmd_profile)

    fc = sub.add_parser("flow-check", help="forward-backward consistency report")
    fc.add_argument("--fwd", help="forward .flo file")
    fc.add_argument("--bwd", help="backward .flo file")
    fc.add_argument("--synth", help="synthesize a pair instead: "
                    "translate:DX,DY | rotate:ANGLE | zoom:SCALE")
    fc.add_argument("--size", default="16x16", help="HxW for --synth")
    fc.add_argument("--delta", type=float, default=1.0)
    fc.set_defaults(func=_cmd_flow_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _print_json(args.func(args))
        return 0
    except UsageError as err:
        _emit_error(err)
        return 2
    except LatentVsrError as err:
        _emit_error(err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
