"""Wavelet color correction: transplant the reference's low band into the output.

Diffusion decoders drift in color. The fix splits both videos into a Haar
low-frequency band (repeated 2x2 block averaging, upsampled back by nearest
duplication) and a residual high band, then recombines low(reference) with
high(output). Means and slow color ramps live entirely in the low band, so
the output inherits the reference's palette while keeping its own detail.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameter, ShapeMismatch
from .resample import resize_planes
from .tensorio import Video

DEFAULT_LEVELS = 5


def _haar_low(channel: np.ndarray, levels: int) -> np.ndarray:
    if levels == 0:
        return channel
    h, w = channel.shape
    hp, wp = h + (h & 1), w + (w & 1)
    padded = channel
    if (hp, wp) != (h, w):
        padded = np.pad(channel, ((0, hp - h), (0, wp - w)), mode="edge")
    a = padded[0::2, 0::2]
    b = padded[0::2, 1::2]
    c = padded[1::2, 0::2]
    d = padded[1::2, 1::2]
    # Grouped so that averaging four equal values is exact in floats.
    coarse = ((a + b) + (c + d)) * 0.25
    low = _haar_low(coarse, levels - 1)
    up = np.repeat(np.repeat(low, 2, axis=0), 2, axis=1)
    return up[:h, :w]


def wavelet_split(image: np.ndarray, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Split (C, H, W) or (H, W) into (low, high) with low + high == image.

    ``low`` is the ``levels``-fold 2x2 Haar approximation upsampled back to
    full size by nearest duplication; ``high`` is the residual.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        low, high = wavelet_split(arr[None], levels)
        return low[0], high[0]
    if arr.ndim != 3:
        raise ShapeMismatch(f"expected (C, H, W) or (H, W), got {arr.shape}")
    if levels < 1:
        raise InvalidParameter(f"levels must be >= 1, got {levels}")
    h, w = arr.shape[1:]
    if h < 2**levels or w < 2**levels:
        raise InvalidParameter(
            f"image {h}x{w} too small for {levels} wavelet levels",
            required=2**levels,
        )
    low = np.stack([_haar_low(c, levels) for c in arr])
    return low, arr - low


def color_correct(
    output: Video, reference: Video, levels: int = DEFAULT_LEVELS
) -> Video:
    """Replace the output's low band with the reference's, frame by frame.

    The reference is bicubic-resized to the output's dimensions first; both
    videos must have the same frame count. Results are clamped to [0, 1].
    """
    if output.num_frames != reference.num_frames:
        raise ShapeMismatch(
            f"frame counts differ: output {output.num_frames}, "
            f"reference {reference.num_frames}"
        )
    out_hw = (output.height, output.width)
    corrected = np.empty_like(output.frames)
    for i in range(output.num_frames):
        ref = reference.frames[i]
        if ref.shape[1:] != out_hw:
            ref = resize_planes(ref, out_hw)
        ref_low, _ = wavelet_split(ref, levels)
        _, out_high = wavelet_split(output.frames[i], levels)
        corrected[i] = np.clip(ref_low + out_high, 0.0, 1.0)
    return Video(
        frames=corrected,
        frame_rate=output.frame_rate,
        source_paths=list(output.source_paths),
    )
