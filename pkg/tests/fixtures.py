"""Shared fixtures for the propagation-trend experiments.

The trend fixture is a smooth panorama crop translating by a whole number of
pixels per frame, driven through the toy pipeline with a procedural denoiser
whose per-frame noise fields flicker. Flows are analytically exact, so the
propagation module gets full validity masks away from the borders.

The ablation runs use a front-loaded step layout: a high-noise dawdle, a
six-step commitment sweep where sigma falls from ~0.96 to ~0.25, and a
low-noise tail. This places the sweep under the mid-run propagation
positions, so estimates fused there are the ones the trajectory commits;
with evenly spaced steps the commitment happens mostly near the very end and
mid-run edits barely register in the final video.
"""

from __future__ import annotations

import numpy as np

import latentvsr as lv
from latentvsr.resample import resize_bicubic

TREND_STEPS = 30
TREND_DAWDLE = 14
TREND_SWEEP = 6
TREND_SIGMA_HIGH = 0.96
TREND_SIGMA_LOW = 0.25
TREND_TAU = 4
TREND_DETAIL_GAIN = 2.0
TREND_TRAJECTORY_WEIGHT = 0.95
TREND_SEED = 0


def translating_video(
    num_frames: int = 16, size: int = 64, stride: int = 4, seed: int = 7
) -> lv.Video:
    """Smooth random panorama whose crop window slides `stride` px per frame."""
    rng = np.random.default_rng(seed)
    width = size + stride * (num_frames - 1)
    coarse = rng.random((3, size // 4, width // 4))
    pano = np.stack([resize_bicubic(c, (size, width)) for c in coarse])
    pano = np.clip(0.15 + 0.7 * pano, 0.0, 1.0)
    frames = np.stack(
        [pano[:, :, stride * i: stride * i + size] for i in range(num_frames)]
    )
    return lv.Video(frames=frames)


def translation_flows(num_frames: int, hw: tuple[int, int], dx: float):
    """Exact flow pairs for content moving by (dx, 0) between frames."""
    return [
        lv.synth_flow("translate", hw, dx=dx, dy=0.0)
        for _ in range(num_frames - 1)
    ]


def steps_from_sigma_targets(
    schedule: lv.NoiseSchedule, targets: np.ndarray
) -> tuple[int, ...]:
    """Map a descending sigma target curve to strictly descending step indices."""
    steps: list[int] = []
    for value in targets:
        t = int(np.argmin(np.abs(schedule.sigmas[1:] - value))) + 1
        while steps and t >= steps[-1]:
            t = steps[-1] - 1
        if t < 1:
            raise ValueError("sigma targets exhaust the schedule")
        steps.append(t)
    return tuple(steps)


def ablation_schedule(
    propagation_positions=frozenset(),
    num_steps: int = TREND_STEPS,
) -> lv.NoiseSchedule:
    """Default-beta schedule with the front-loaded ablation step layout."""
    base = lv.make_schedule(num_inference_steps=num_steps)
    tail = num_steps - TREND_DAWDLE - TREND_SWEEP
    targets = np.concatenate(
        [
            np.geomspace(base.sigma(base.t_train), TREND_SIGMA_HIGH,
                         TREND_DAWDLE + 1)[:-1],
            np.geomspace(TREND_SIGMA_HIGH, TREND_SIGMA_LOW,
                         TREND_SWEEP + 1)[:-1],
            np.geomspace(TREND_SIGMA_LOW, base.sigma(1), tail),
        ]
    )
    return base.with_steps(
        steps_from_sigma_targets(base, targets),
        frozenset(propagation_positions),
    )


def run_trend_pipeline(video: lv.Video, positions) -> lv.Video:
    """One ablation run: upscale the fixture with propagation at `positions`."""
    sched = ablation_schedule(frozenset(positions))
    config = lv.SamplerConfig(
        schedule=sched,
        condition=lv.Condition(noise_level=TREND_TAU),
        propagation=lv.PropagationConfig(beta=0.5, delta=1.0),
        rng_seed=TREND_SEED,
        init_latent="zeros",
    )
    denoiser = lv.procedural_denoiser(
        sched,
        TREND_DETAIL_GAIN,
        trajectory_weight=TREND_TRAJECTORY_WEIGHT,
        seed=TREND_SEED,
    )
    flows = translation_flows(
        video.num_frames, (video.height, video.width), dx=-4.0
    )
    return lv.sample(video, denoiser, config, flows)


def trend_warping_error(output: lv.Video) -> float:
    """E_warp of an ablation output, measured with exact output-scale flows."""
    flows = translation_flows(
        output.num_frames, (output.height, output.width), dx=-16.0
    )
    return lv.warping_error(output, flows, delta=1.0)
