"""Bicubic resampling helpers shared by the toy codec, degradation and color fix.

Resizing routes through Pillow's float32 "F" mode, the only widely available
exact-bicubic path without a heavyweight dependency; outputs are returned as
float64. Values outside [0, 1] pass through untouched (bicubic overshoot is
the caller's business).
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import InvalidParameter


def resize_bicubic(channel: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bicubic-resize one (H, W) channel to ``out_hw``."""
    arr = np.asarray(channel)
    if arr.ndim != 2:
        raise InvalidParameter(f"expected a 2-D channel, got shape {arr.shape}")
    out_h, out_w = out_hw
    if out_h < 1 or out_w < 1:
        raise InvalidParameter(f"target size must be positive, got {out_hw}")
    if arr.shape == (out_h, out_w):
        return arr.astype(np.float64)
    im = Image.fromarray(arr.astype(np.float32), mode="F")
    return np.asarray(
        im.resize((out_w, out_h), Image.Resampling.BICUBIC), dtype=np.float64
    )


def resize_planes(planes: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bicubic-resize every leading-axis channel of a (C, H, W) array."""
    arr = np.asarray(planes)
    if arr.ndim != 3:
        raise InvalidParameter(f"expected (C, H, W), got shape {arr.shape}")
    return np.stack([resize_bicubic(c, out_hw) for c in arr])
