"""Evaluation suite: PSNR, SSIM, flow warping error, temporal profiles.

PSNR and SSIM operate on [0, 1] floats before any 8-bit quantization. The
warping error measures temporal stability of a single video: each frame is
compared against its flow-warped predecessor under the forward-backward
validity mask, and the masked mean absolute difference is averaged over
adjacent pairs and reported x10^3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .errors import (
    AllMasksEmpty,
    FlowCountMismatch,
    RowOutOfRange,
    ShapeMismatch,
    TooSmall,
)
from .flow import (
    FlowPair,
    consistency_error,
    displaced_out_of_bounds,
    validity_mask,
    warp_nearest,
)
from .tensorio import Video

PSNR_CEILING_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
WARP_REPORT_SCALE = 1e3

# Rec. 601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class MetricReport:
    """Aggregate scores plus per-frame (or per-pair, for e_warp) breakdowns."""

    psnr: float
    ssim: float
    e_warp: float | None = None
    per_frame: dict[str, list] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "psnr": self.psnr,
            "ssim": self.ssim,
            "e_warp": self.e_warp,
            "per_frame": self.per_frame,
        }


def _check_videos(a: Video, b: Video) -> None:
    if a.frames.shape != b.frames.shape:
        raise ShapeMismatch(
            f"video shapes differ: {a.frames.shape} vs {b.frames.shape}"
        )


def _psnr_from_mse(mse: float) -> float:
    if mse <= 0.0:
        return PSNR_CEILING_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CEILING_DB)


def psnr(a: Video, b: Video) -> float:
    """10*log10(1/MSE) over all samples, capped at 100 dB."""
    _check_videos(a, b)
    diff = a.frames - b.frames
    return _psnr_from_mse(float(np.mean(diff * diff)))


def _luma(frame: np.ndarray) -> np.ndarray:
    return np.tensordot(_LUMA, frame, axes=(0, 0))


def _gaussian_taps(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _local_mean(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    pad = (len(taps) - 1) // 2
    sm = correlate1d(correlate1d(img, taps, axis=0), taps, axis=1)
    return sm[pad:-pad, pad:-pad]


def _ssim_frame(fa: np.ndarray, fb: np.ndarray, taps: np.ndarray) -> float:
    a = _luma(fa)
    b = _luma(fb)
    mu_a = _local_mean(a, taps)
    mu_b = _local_mean(b, taps)
    var_a = _local_mean(a * a, taps) - mu_a * mu_a
    var_b = _local_mean(b * b, taps) - mu_b * mu_b
    cov = _local_mean(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: Video, b: Video) -> float:
    """Mean single-scale SSIM on luma, 11-tap Gaussian window (sigma 1.5).

    Local statistics are evaluated only where the window fits entirely inside
    the frame, so H and W must be at least 11.
    """
    _check_videos(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise TooSmall(
            f"SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, "
            f"got {a.height}x{a.width}"
        )
    taps = _gaussian_taps(SSIM_WINDOW, SSIM_SIGMA)
    scores = [
        _ssim_frame(fa, fb, taps) for fa, fb in zip(a.frames, b.frames)
    ]
    return float(np.mean(scores))


def _pair_warp_error(
    prev_frame: np.ndarray, cur_frame: np.ndarray, pair: FlowPair, delta: float
) -> float | None:
    """Masked mean |cur - warp(prev)| for one adjacent pair, or None if the
    mask is empty. Positions whose consistency lookup or warp lookup leaves
    the grid are excluded."""
    err = consistency_error(pair.forward, pair.backward)
    oob = displaced_out_of_bounds(pair.forward) | displaced_out_of_bounds(
        pair.backward
    )
    mask = validity_mask(err, delta, out_of_bounds=oob).mask
    if not mask.any():
        return None
    warped = warp_nearest(prev_frame, pair.backward)
    diff = np.abs(cur_frame - warped)[:, mask]
    return float(np.mean(diff))


def warping_error(
    video: Video, flows: Sequence[FlowPair], delta: float = 1.0
) -> float:
    """Flow warping error of a video, reported x10^3.

    Mean over adjacent pairs of the masked mean absolute difference between
    each frame and its warped predecessor. Pairs with empty masks are
    skipped; if every mask is empty the metric is undefined and
    AllMasksEmpty is raised.
    """
    t = video.num_frames
    if len(flows) != t - 1:
        raise FlowCountMismatch(
            f"need {t - 1} flow pairs for {t} frames, got {len(flows)}",
            expected=t - 1,
            actual=len(flows),
        )
    for i, pair in enumerate(flows):
        if pair.spatial_shape != (video.height, video.width):
            raise ShapeMismatch(
                f"flow pair {i} dims {pair.spatial_shape} do not match "
                f"video dims {(video.height, video.width)}"
            )
    values = []
    for i in range(1, t):
        v = _pair_warp_error(
            video.frames[i - 1], video.frames[i], flows[i - 1], delta
        )
        if v is not None:
            values.append(v)
    if not values:
        raise AllMasksEmpty("every validity mask is empty; warping error undefined")
    return float(np.mean(values)) * WARP_REPORT_SCALE


def per_pair_warping_error(
    video: Video, flows: Sequence[FlowPair], delta: float = 1.0
) -> list[float | None]:
    """Per-adjacent-pair warping errors (x10^3), None where the mask is empty."""
    t = video.num_frames
    if len(flows) != t - 1:
        raise FlowCountMismatch(
            f"need {t - 1} flow pairs for {t} frames, got {len(flows)}"
        )
    out: list[float | None] = []
    for i in range(1, t):
        v = _pair_warp_error(
            video.frames[i - 1], video.frames[i], flows[i - 1], delta
        )
        out.append(None if v is None else v * WARP_REPORT_SCALE)
    return out


def temporal_profile(video: Video, row: int) -> np.ndarray:
    """Stack one pixel row across time: output shape (T, W, 3).

    Static content produces identical profile rows; temporal jitter shows up
    as noise along the vertical (time) axis.
    """
    if not 0 <= row < video.height:
        raise RowOutOfRange(
            f"row {row} outside [0, {video.height - 1}]", row=row
        )
    return np.transpose(video.frames[:, :, row, :], (0, 2, 1))


def compute_report(
    reference: Video,
    test: Video,
    flows: Sequence[FlowPair] | None = None,
    delta: float = 1.0,
) -> MetricReport:
    """Full-reference report; e_warp (of the test video) requires flows."""
    _check_videos(reference, test)
    taps = _gaussian_taps(SSIM_WINDOW, SSIM_SIGMA)
    per_frame_psnr = []
    per_frame_ssim = []
    for fr, ft in zip(reference.frames, test.frames):
        diff = fr - ft
        per_frame_psnr.append(_psnr_from_mse(float(np.mean(diff * diff))))
        per_frame_ssim.append(_ssim_frame(fr, ft, taps))
    per_frame: dict[str, list] = {
        "psnr": per_frame_psnr,
        "ssim": per_frame_ssim,
    }
    e_warp = None
    if flows is not None:
        e_warp = warping_error(test, flows, delta)
        per_frame["e_warp"] = per_pair_warping_error(test, flows, delta)
    return MetricReport(
        psnr=psnr(reference, test),
        ssim=ssim(reference, test),
        e_warp=e_warp,
        per_frame=per_frame,
    )
