"""The inference engine: tiled, segmented diffusion sampling with propagation.

Per inference step, descending over the schedule's step list:

1. evaluate the denoiser per temporal segment and per spatial tile (with
   classifier-free guidance when a prompt is present and the scale is not 1);
2. blend tile outputs with normalized ramp weights and average segment
   overlaps, producing one full-sequence velocity field;
3. form the clean estimate via predict_z0;
4. if this step's position belongs to the schedule's propagation set, run
   flow-guided recurrent propagation on the estimate;
5. take the deterministic update to the next step.

After the last step the estimate is decoded by the toy x4 decoder, with
optional wavelet color correction against the input.

Everything is deterministic given the config's RNG seed, and bitwise
independent of the thread count: all noise is drawn up front on one thread,
tile/segment tasks are pure, and reductions happen in a fixed order. Blending
and merging are computed in base-plus-correction form so that regions where
all contributions agree come out bitwise identical to any single
contribution; a pointwise denoiser therefore yields bitwise identical tiled
and untiled runs.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import schedule as sched_mod
from .color import color_correct
from .errors import (
    DimensionNotDivisible,
    DivisionByZeroStep,
    FlowCountMismatch,
    InvalidParameter,
    ShapeMismatch,
)
from .flow import FlowPair
from .propagate import PropagationConfig, compute_pair_masks, propagate
from .resample import resize_bicubic
from .schedule import Condition, NoiseSchedule, cfg_combine
from .tensorio import LatentVideo, Video

LATENT_CHANNELS = 4
DECODE_FACTOR = 4


# --- spatial tiling -------------------------------------------------------------


@dataclass(frozen=True)
class Tile:
    """One spatial window plus its normalized blend weights (h, w)."""

    y0: int
    x0: int
    h: int
    w: int
    weights: np.ndarray


def _axis_starts(length: int, size: int, stride: int) -> list[int]:
    if size >= length:
        return [0]
    starts = list(range(0, length - size + 1, stride))
    if starts[-1] + size < length:
        starts.append(length - size)
    return starts


def _axis_ramp(start: int, size: int, length: int, overlap: int) -> np.ndarray:
    """Per-axis weights: 1 in the interior, linear ramps on interior edges."""
    w = np.ones(size, dtype=np.float64)
    if overlap == 0:
        return w
    ramp = np.arange(1, overlap + 1, dtype=np.float64) / (overlap + 1)
    if start > 0:
        w[:overlap] = np.minimum(w[:overlap], ramp)
    if start + size < length:
        w[size - overlap:] = np.minimum(w[size - overlap:], ramp[::-1])
    return w


def plan_tiles(
    height: int, width: int, tile_size: int, overlap: int
) -> list[Tile]:
    """Cover an HxW grid with overlapping tiles.

    Tiles step by tile_size - overlap; the last tile per axis is shifted to
    end flush at the border. Raw weights are a separable linear ramp of width
    ``overlap`` on interior edges, then normalized per pixel so that covering
    weights sum to 1.
    """
    if tile_size < 1:
        raise InvalidParameter(f"tile_size must be >= 1, got {tile_size}")
    if not 0 <= overlap < tile_size:
        raise InvalidParameter(
            f"overlap must satisfy 0 <= overlap < tile_size, got "
            f"overlap={overlap}, tile_size={tile_size}"
        )
    if height < 1 or width < 1:
        raise InvalidParameter(f"grid must be positive, got {height}x{width}")
    stride = tile_size - overlap
    size_y = min(tile_size, height)
    size_x = min(tile_size, width)
    raw: list[tuple[int, int, int, int, np.ndarray]] = []
    total = np.zeros((height, width), dtype=np.float64)
    for y0 in _axis_starts(height, size_y, stride):
        wy = _axis_ramp(y0, size_y, height, min(overlap, size_y - 1))
        for x0 in _axis_starts(width, size_x, stride):
            wx = _axis_ramp(x0, size_x, width, min(overlap, size_x - 1))
            weights = wy[:, None] * wx[None, :]
            raw.append((y0, x0, size_y, size_x, weights))
            total[y0:y0 + size_y, x0:x0 + size_x] += weights
    tiles = [
        Tile(y0, x0, h, w, weights / total[y0:y0 + h, x0:x0 + w])
        for y0, x0, h, w, weights in raw
    ]
    return tiles


def blend_tiles(
    tile_outputs: Sequence[np.ndarray],
    tiles: Sequence[Tile],
    height: int,
    width: int,
) -> np.ndarray:
    """Weighted recombination of per-tile outputs into one (..., H, W) array.

    Computed as base + sum_i w_i * (tile_i - base), which equals the weighted
    sum when weights cover to 1 and is bitwise exact wherever all covering
    tiles agree (single-coverage pixels in particular).
    """
    if len(tile_outputs) != len(tiles):
        raise ShapeMismatch(
            f"{len(tile_outputs)} outputs for {len(tiles)} tiles"
        )
    for out, tile in zip(tile_outputs, tiles):
        if out.shape[-2:] != (tile.h, tile.w):
            raise ShapeMismatch(
                f"tile output {out.shape[-2:]} does not match tile "
                f"{(tile.h, tile.w)}"
            )
    lead = tile_outputs[0].shape[:-2]
    if len(tiles) == 1 and tiles[0].h == height and tiles[0].w == width:
        return np.array(tile_outputs[0], copy=True)
    base = np.zeros(lead + (height, width), dtype=np.float64)
    for out, tile in zip(tile_outputs, tiles):
        base[..., tile.y0:tile.y0 + tile.h, tile.x0:tile.x0 + tile.w] = out
    delta = np.zeros_like(base)
    for out, tile in zip(tile_outputs, tiles):
        window = (
            ...,
            slice(tile.y0, tile.y0 + tile.h),
            slice(tile.x0, tile.x0 + tile.w),
        )
        delta[window] += tile.weights * (out - base[window])
    return base + delta


# --- temporal segmentation -----------------------------------------------------


@dataclass(frozen=True)
class SamplePlan:
    """Complete spatial and temporal coverage plan for one latent shape."""

    tiles: tuple[Tile, ...]
    segments: tuple[tuple[int, int], ...]
    tile_size: int
    tile_overlap: int
    segment_len: int
    segment_overlap: int

    @classmethod
    def build(
        cls,
        num_frames: int,
        height: int,
        width: int,
        tile_size: int,
        tile_overlap: int,
        segment_len: int,
        segment_overlap: int,
    ) -> "SamplePlan":
        plan = cls(
            tiles=tuple(plan_tiles(height, width, tile_size, tile_overlap)),
            segments=tuple(plan_segments(num_frames, segment_len,
                                         segment_overlap)),
            tile_size=tile_size,
            tile_overlap=tile_overlap,
            segment_len=segment_len,
            segment_overlap=segment_overlap,
        )
        total = np.zeros((height, width))
        for t in plan.tiles:
            total[t.y0:t.y0 + t.h, t.x0:t.x0 + t.w] += t.weights
        if np.max(np.abs(total - 1.0)) > 1e-6:
            raise InvalidParameter("tile weights do not cover the grid to 1")
        covered = np.zeros(num_frames, dtype=bool)
        for s, e in plan.segments:
            covered[s:e] = True
        if not covered.all():
            raise InvalidParameter("segments do not cover every frame")
        return plan


def plan_segments(
    num_frames: int, segment_len: int, overlap: int
) -> list[tuple[int, int]]:
    """Cover [0, T) with [start, end) windows stepping by segment_len - overlap.

    The last segment is shifted to end flush at T.
    """
    if segment_len < 1:
        raise InvalidParameter(f"segment_len must be >= 1, got {segment_len}")
    if not 0 <= overlap < segment_len:
        raise InvalidParameter(
            f"overlap must satisfy 0 <= overlap < segment_len, got "
            f"overlap={overlap}, segment_len={segment_len}"
        )
    if num_frames < 1:
        raise InvalidParameter(f"num_frames must be >= 1, got {num_frames}")
    size = min(segment_len, num_frames)
    stride = segment_len - overlap
    return [(s, s + size) for s in _axis_starts(num_frames, size, stride)]


def merge_segments(
    segment_outputs: Sequence[np.ndarray],
    segments: Sequence[tuple[int, int]],
    num_frames: int,
) -> np.ndarray:
    """Arithmetic average of overlapping segment outputs per frame.

    Uses the same base-plus-correction scheme as blend_tiles, so frames where
    all covering segments agree are returned bitwise.
    """
    if len(segment_outputs) != len(segments):
        raise ShapeMismatch(
            f"{len(segment_outputs)} outputs for {len(segments)} segments"
        )
    for out, (s, e) in zip(segment_outputs, segments):
        if out.shape[0] != e - s:
            raise ShapeMismatch(
                f"segment output holds {out.shape[0]} frames for [{s}, {e})"
            )
    if len(segments) == 1 and segments[0] == (0, num_frames):
        return np.array(segment_outputs[0], copy=True)
    tail = segment_outputs[0].shape[1:]
    counts = np.zeros(num_frames, dtype=np.float64)
    for s, e in segments:
        counts[s:e] += 1.0
    if np.any(counts == 0):
        raise InvalidParameter("segments do not cover every frame")
    base = np.zeros((num_frames,) + tail, dtype=np.float64)
    for out, (s, e) in zip(segment_outputs, segments):
        base[s:e] = out
    delta = np.zeros_like(base)
    inv = 1.0 / counts
    for out, (s, e) in zip(segment_outputs, segments):
        delta[s:e] += (out - base[s:e]) * inv[s:e, None, None, None]
    return base + delta


# --- denoiser interface and toy denoisers ---------------------------------------


@dataclass(frozen=True)
class Window:
    """Absolute placement of a crop handed to a denoiser.

    Tile and segment views lose their position in the full sequence; the
    window restores it so position-aware toy denoisers stay consistent
    across any tiling.
    """

    frame0: int = 0
    y0: int = 0
    x0: int = 0


class Denoiser(Protocol):
    """Velocity predictor contract: shape-preserving, deterministic."""

    def evaluate(
        self,
        z_t: np.ndarray,
        x_tau: np.ndarray,
        cond: Condition,
        t: int,
        window: Window | None = None,
    ) -> np.ndarray:
        ...


class OracleDenoiser:
    """Denoiser that steers every trajectory exactly to a fixed target latent.

    Emits v = (alpha_t * z_t - target) / sigma_t, so predict_z0 recovers the
    target identically at any step with sigma_t > 0.
    """

    def __init__(self, target: np.ndarray, schedule: NoiseSchedule):
        self.target = np.asarray(target, dtype=np.float64)
        if self.target.ndim != 4:
            raise ShapeMismatch(
                f"target must have shape (T, C, H, W), got {self.target.shape}"
            )
        self.schedule = schedule

    def evaluate(self, z_t, x_tau, cond, t, window=None):
        sigma = self.schedule.sigma(t)
        if sigma == 0.0:
            raise DivisionByZeroStep(f"sigma is 0 at step {t}", step=t)
        win = window or Window()
        tt, _, hh, ww = z_t.shape
        target = self.target[
            win.frame0:win.frame0 + tt,
            :,
            win.y0:win.y0 + hh,
            win.x0:win.x0 + ww,
        ]
        if target.shape != z_t.shape:
            raise ShapeMismatch(
                f"window {win} of target {self.target.shape} does not cover "
                f"input {z_t.shape}"
            )
        return (self.schedule.alpha(t) * z_t - target) / sigma


def oracle_denoiser(target: np.ndarray, schedule: NoiseSchedule) -> OracleDenoiser:
    return OracleDenoiser(target, schedule)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def _prompt_digest(prompt: np.ndarray | None) -> int:
    if prompt is None:
        payload = b"null-prompt"
    else:
        payload = np.ascontiguousarray(prompt, dtype="<f8").tobytes()
    return int.from_bytes(
        hashlib.blake2b(payload, digest_size=8).digest(), "little"
    )


class ProceduralDenoiser:
    """Restoration-plus-texture toy denoiser.

    The clean estimate is the conditioning input plus hallucinated texture,
    optionally leaned toward what the trajectory has already committed:

        base = x_tau + detail_gain * sigma_tau * field(prompt, frame)
        z0   = base + g_t * (z_t - alpha_t * base)
        g_t  = trajectory_weight * alpha_t / (alpha_t^2 + 0.1 * sigma_t^2)

    ``field`` is a per-frame pseudo-random field in [-1, 1), keyed by
    absolute pixel position so crops of the same frame always agree; frames
    get independent fields, which makes the raw output flicker. sigma_tau is
    monotone in the noise level, so higher tau hallucinates more.

    ``trajectory_weight`` (default 0, giving the pure conditioning formula)
    controls the posterior-style readout gain g_t, which grows toward
    trajectory_weight / alpha_t as noise shrinks: late in denoising the
    estimate is dominated by what the latent trajectory already carries.
    Without this readout each step's estimate ignores z_t entirely and
    nothing done to intermediate latents, propagation included, can reach
    the final output.
    """

    # Texture-prior weight in the readout gain; keeps g_t bounded at high noise.
    READOUT_PRIOR_WEIGHT = 0.1

    def __init__(
        self,
        schedule: NoiseSchedule,
        detail_gain: float,
        *,
        trajectory_weight: float = 0.0,
        seed: int = 0,
    ):
        if not (np.isfinite(detail_gain) and detail_gain >= 0):
            raise InvalidParameter(f"detail_gain must be >= 0, got {detail_gain}")
        if not (np.isfinite(trajectory_weight) and 0 <= trajectory_weight < 1):
            raise InvalidParameter(
                f"trajectory_weight must lie in [0, 1), got {trajectory_weight}"
            )
        self.schedule = schedule
        self.detail_gain = float(detail_gain)
        self.trajectory_weight = float(trajectory_weight)
        self.seed = int(seed)

    def noise_field(
        self, cond: Condition, shape: tuple[int, ...], window: Window
    ) -> np.ndarray:
        """Deterministic per-frame field in [-1, 1) for a (T, C, H, W) crop."""
        tt, cc, hh, ww = shape
        base = np.uint64((self.seed ^ _prompt_digest(cond.prompt_embedding))
                         & 0xFFFFFFFFFFFFFFFF)
        frames = np.arange(window.frame0, window.frame0 + tt, dtype=np.uint64)
        frame_keys = _splitmix64(base + frames * np.uint64(0x9E3779B97F4A7C15))
        chans = np.arange(cc, dtype=np.uint64)
        ys = np.arange(window.y0, window.y0 + hh, dtype=np.uint64)
        xs = np.arange(window.x0, window.x0 + ww, dtype=np.uint64)
        counter = (
            frame_keys[:, None, None, None]
            + chans[None, :, None, None] * np.uint64(0x100000000000)
            + ys[None, None, :, None] * np.uint64(0x100000)
            + xs[None, None, None, :]
        )
        bits = _splitmix64(counter)
        return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-52) - 1.0

    def evaluate(self, z_t, x_tau, cond, t, window=None):
        alpha = self.schedule.alpha(t)
        sigma = self.schedule.sigma(t)
        if sigma == 0.0:
            raise DivisionByZeroStep(f"sigma is 0 at step {t}", step=t)
        win = window or Window()
        base = x_tau
        if self.detail_gain > 0:
            gain = self.detail_gain * self.schedule.sigma(cond.noise_level)
            base = x_tau + gain * self.noise_field(cond, z_t.shape, win)
        z0_hat = base
        if self.trajectory_weight > 0:
            readout = self.trajectory_weight * alpha / (
                alpha * alpha + self.READOUT_PRIOR_WEIGHT * sigma * sigma
            )
            z0_hat = base + readout * (z_t - alpha * base)
        return (alpha * z_t - z0_hat) / sigma


def procedural_denoiser(
    schedule: NoiseSchedule,
    detail_gain: float,
    *,
    trajectory_weight: float = 0.0,
    seed: int = 0,
) -> ProceduralDenoiser:
    return ProceduralDenoiser(
        schedule, detail_gain, trajectory_weight=trajectory_weight, seed=seed
    )


# --- toy latent codec ------------------------------------------------------------


def as_conditioning_latent(video: Video) -> np.ndarray:
    """Embed a video at native resolution into latent layout:
    RGB in channels 0-2, channel 3 zero. Shape (T, 4, H, W)."""
    t, _, h, w = video.frames.shape
    out = np.zeros((t, LATENT_CHANNELS, h, w), dtype=np.float64)
    out[:, :3] = video.frames
    return out


def toy_encode(video: Video) -> LatentVideo:
    """Bicubic x4 downsample per RGB channel into latent channels 0-2;
    channel 3 is zero. Requires dims divisible by 4."""
    t, _, h, w = video.frames.shape
    if h % DECODE_FACTOR or w % DECODE_FACTOR:
        raise DimensionNotDivisible(
            f"dims {h}x{w} not divisible by {DECODE_FACTOR}"
        )
    lh, lw = h // DECODE_FACTOR, w // DECODE_FACTOR
    data = np.zeros((t, LATENT_CHANNELS, lh, lw), dtype=np.float64)
    for i in range(t):
        for c in range(3):
            data[i, c] = resize_bicubic(video.frames[i, c], (lh, lw))
    return LatentVideo(data=data)


def toy_decode(latent: LatentVideo | np.ndarray) -> Video:
    """Bicubic x4 upsample of latent channels 0-2, clamped to [0, 1]."""
    data = latent.data if isinstance(latent, LatentVideo) else np.asarray(latent)
    if data.ndim != 4 or data.shape[1] < 3:
        raise ShapeMismatch(
            f"expected latent of shape (T, >=3, H, W), got {data.shape}"
        )
    t, _, lh, lw = data.shape
    h, w = lh * DECODE_FACTOR, lw * DECODE_FACTOR
    frames = np.empty((t, 3, h, w), dtype=np.float64)
    for i in range(t):
        for c in range(3):
            frames[i, c] = resize_bicubic(data[i, c], (h, w))
    return Video(frames=np.clip(frames, 0.0, 1.0))


# --- the sampling loop ------------------------------------------------------------


@dataclass
class SamplerConfig:
    """Everything the sampling loop needs besides the denoiser and flows."""

    schedule: NoiseSchedule
    condition: Condition = field(default_factory=Condition)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    tile_size: int = 80
    tile_overlap: int = 16
    segment_len: int = 8
    segment_overlap: int = 2
    rng_seed: int = 0
    tau_max: int = sched_mod.DEFAULT_TAU_MAX
    init_latent: str = "noise"
    threads: int = 1
    color_fix_levels: int | None = None

    def __post_init__(self):
        if self.init_latent not in ("noise", "zeros"):
            raise InvalidParameter(
                f"init_latent must be 'noise' or 'zeros', got {self.init_latent!r}"
            )
        if self.threads < 1:
            raise InvalidParameter(f"threads must be >= 1, got {self.threads}")


def _evaluate_step(
    denoiser: Denoiser,
    z: np.ndarray,
    x_tau: np.ndarray,
    cond: Condition,
    t: int,
    segments: Sequence[tuple[int, int]],
    tiles: Sequence[Tile],
    threads: int,
) -> np.ndarray:
    """Denoise every (segment, tile) crop and recombine to a full v field."""
    t_frames, _, height, width = z.shape
    scale = cond.guidance_scale
    use_cfg = scale != 1.0 and cond.prompt_embedding is not None
    uncond = cond.without_prompt() if use_cfg else None

    def run_tile(seg: tuple[int, int], tile: Tile) -> np.ndarray:
        s, e = seg
        sl = (
            slice(s, e),
            slice(None),
            slice(tile.y0, tile.y0 + tile.h),
            slice(tile.x0, tile.x0 + tile.w),
        )
        win = Window(frame0=s, y0=tile.y0, x0=tile.x0)
        if use_cfg:
            v_c = denoiser.evaluate(z[sl], x_tau[sl], cond, t, window=win)
            v_u = denoiser.evaluate(z[sl], x_tau[sl], uncond, t, window=win)
            return cfg_combine(v_u, v_c, scale)
        return denoiser.evaluate(z[sl], x_tau[sl], cond, t, window=win)

    tasks = [(seg, tile) for seg in segments for tile in tiles]
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda st: run_tile(*st), tasks))
    else:
        results = [run_tile(seg, tile) for seg, tile in tasks]

    seg_fields = []
    idx = 0
    for seg in segments:
        tile_outputs = results[idx:idx + len(tiles)]
        idx += len(tiles)
        seg_fields.append(blend_tiles(tile_outputs, tiles, height, width))
    return merge_segments(seg_fields, segments, t_frames)


def run_diffusion(
    x_cond: np.ndarray,
    denoiser: Denoiser,
    config: SamplerConfig,
    flows: Sequence[FlowPair] | None = None,
    trace=None,
) -> np.ndarray:
    """Run the full step loop on a conditioning latent; returns the final
    clean-latent estimate, same shape as ``x_cond``.

    ``trace(position, t, z_t, z0_hat)``, if given, observes every step after
    propagation; useful for convergence plots and seam checks.
    """
    x = np.asarray(x_cond, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeMismatch(f"expected (T, C, H, W) conditioning, got {x.shape}")
    sched = config.schedule
    steps = sched.inference_steps
    if not steps:
        raise InvalidParameter("schedule has no inference steps")
    t_frames, _, height, width = x.shape

    prop_positions = sched.propagation_steps
    masks = None
    if prop_positions:
        if flows is None or len(flows) != t_frames - 1:
            raise FlowCountMismatch(
                f"propagation needs {t_frames - 1} flow pairs, got "
                f"{0 if flows is None else len(flows)}"
            )
        for i, pair in enumerate(flows):
            if pair.spatial_shape != (height, width):
                raise ShapeMismatch(
                    f"flow pair {i} dims {pair.spatial_shape} do not match "
                    f"latent dims {(height, width)}"
                )
        masks = compute_pair_masks(flows, config.propagation.delta)

    rng = np.random.default_rng(config.rng_seed)
    if config.init_latent == "noise":
        z = rng.standard_normal(x.shape)
    else:
        z = np.zeros_like(x)
    eps_cond = rng.standard_normal(x.shape)
    x_tau = sched_mod.noise_input(
        sched, x, config.condition.noise_level, eps_cond, tau_max=config.tau_max
    )

    plan = SamplePlan.build(
        t_frames, height, width, config.tile_size, config.tile_overlap,
        config.segment_len, config.segment_overlap,
    )

    for pos, t in enumerate(steps):
        v = _evaluate_step(
            denoiser, z, x_tau, config.condition, t, plan.segments, plan.tiles,
            config.threads,
        )
        z0_hat = sched_mod.predict_z0(sched, z, v, t)
        if pos in prop_positions:
            z0_hat = propagate(z0_hat, flows, config.propagation, masks=masks)
        if trace is not None:
            trace(pos, t, z, z0_hat)
        t_prev = steps[pos + 1] if pos + 1 < len(steps) else 0
        z = sched_mod.ddim_step(sched, z, z0_hat, t, t_prev)
    return z


def sample(
    video: Video,
    denoiser: Denoiser,
    config: SamplerConfig,
    flows: Sequence[FlowPair] | None = None,
) -> Video:
    """Upscale a video x4: embed, run the diffusion loop, decode, color-fix."""
    x = as_conditioning_latent(video)
    z0 = run_diffusion(x, denoiser, config, flows)
    out = toy_decode(z0)
    if config.color_fix_levels is not None:
        out = color_correct(out, video, levels=config.color_fix_levels)
    return replace_frame_rate(out, video.frame_rate)


def replace_frame_rate(video: Video, frame_rate: float | None) -> Video:
    if video.frame_rate == frame_rate:
        return video
    return Video(
        frames=video.frames,
        frame_rate=frame_rate,
        source_paths=list(video.source_paths),
    )
