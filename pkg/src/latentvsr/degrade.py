"""Seeded synthetic low-quality video generation.

A reduced single-order pipeline: Gaussian blur (kernel truncated at three
sigma, normalized), bicubic downsampling by an integer factor, then additive
Gaussian noise clamped back to [0, 1]. Deterministic for a given seed.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DimensionNotDivisible, InvalidParameter
from .resample import resize_planes
from .tensorio import Video


def degrade(
    hr: Video,
    blur_sigma: float = 1.5,
    scale: int = 4,
    noise_sigma: float = 0.05,
    seed: int = 0,
) -> Video:
    """Degrade a high-resolution video into a low-quality counterpart."""
    if not (np.isfinite(blur_sigma) and blur_sigma >= 0):
        raise InvalidParameter(f"blur_sigma must be >= 0, got {blur_sigma}")
    if not (np.isfinite(noise_sigma) and noise_sigma >= 0):
        raise InvalidParameter(f"noise_sigma must be >= 0, got {noise_sigma}")
    if scale < 1:
        raise InvalidParameter(f"scale must be >= 1, got {scale}")
    h, w = hr.height, hr.width
    if h % scale or w % scale:
        raise DimensionNotDivisible(
            f"dims {h}x{w} not divisible by scale {scale}", scale=scale
        )

    rng = np.random.default_rng(seed)
    out_hw = (h // scale, w // scale)
    frames = np.empty((hr.num_frames, 3, *out_hw), dtype=np.float64)
    for i, frame in enumerate(hr.frames):
        work = frame
        if blur_sigma > 0:
            work = gaussian_filter(
                work, sigma=(0, blur_sigma, blur_sigma), truncate=3.0
            )
        if scale > 1:
            work = resize_planes(work, out_hw)
        if noise_sigma > 0:
            work = work + rng.normal(0.0, noise_sigma, size=work.shape)
        frames[i] = np.clip(work, 0.0, 1.0)
    return Video(frames=frames, frame_rate=hr.frame_rate)
