"""Flow validity analysis and nearest-mode latent warping.

Conventions used throughout:

* A flow field f between adjacent frames gives, at grid position p, the
  displacement (dx, dy) in pixels. Backward warping samples the source frame
  at p + f(p).
* Displaced lookups round to the nearest integer cell with ties toward +inf
  (floor(x + 0.5)) and clamp to the grid; positions whose rounded lookup left
  the grid are flagged out-of-bounds and excluded from validity masks.
* The forward-backward consistency error at p is
  || f_fwd(p) + f_bwd(round(p + f_fwd(p))) ||^2 (squared pixels); a position
  is valid when this error is strictly below the threshold delta and its
  lookup stayed in bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, ShapeMismatch
from .tensorio import FlowField


@dataclass
class FlowPair:
    """Forward and backward flow between one pair of adjacent frames."""

    forward: FlowField
    backward: FlowField

    def __post_init__(self):
        if self.forward.direction != "forward" or self.backward.direction != "backward":
            raise InvalidParameter(
                "pair must hold one forward and one backward field",
                forward=self.forward.direction,
                backward=self.backward.direction,
            )
        if self.forward.spatial_shape != self.backward.spatial_shape:
            raise ShapeMismatch(
                f"flow pair dims differ: {self.forward.spatial_shape} "
                f"vs {self.backward.spatial_shape}"
            )

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.forward.spatial_shape


@dataclass
class ValidityMask:
    """Boolean mask of positions whose flow passed the consistency check."""

    mask: np.ndarray
    threshold_used: float


def _vectors(flow) -> np.ndarray:
    v = flow.vectors if isinstance(flow, FlowField) else np.asarray(flow)
    if v.ndim != 3 or v.shape[0] != 2:
        raise ShapeMismatch(f"expected flow of shape (2, H, W), got {v.shape}")
    return np.asarray(v, dtype=np.float64)


def _rounded_lookup(v: np.ndarray):
    """Rounded, clamped lookup coordinates plus the out-of-bounds flags."""
    h, w = v.shape[1], v.shape[2]
    ys, xs = np.mgrid[0:h, 0:w]
    lx = np.floor(xs + v[0] + 0.5).astype(np.int64)
    ly = np.floor(ys + v[1] + 0.5).astype(np.int64)
    oob = (lx < 0) | (lx >= w) | (ly < 0) | (ly >= h)
    return np.clip(ly, 0, h - 1), np.clip(lx, 0, w - 1), oob


def consistency_error(f_fwd, f_bwd) -> np.ndarray:
    """Forward-backward consistency error per position (squared pixels).

    Out-of-bounds lookups are clamped for the error value itself; use
    :func:`displaced_out_of_bounds` (or the masks returned by
    :func:`pair_validity`) to exclude them.
    """
    vf = _vectors(f_fwd)
    vb = _vectors(f_bwd)
    if vf.shape != vb.shape:
        raise ShapeMismatch(
            f"flow shapes differ: {vf.shape} vs {vb.shape}"
        )
    ly, lx, _ = _rounded_lookup(vf)
    ex = vf[0] + vb[0][ly, lx]
    ey = vf[1] + vb[1][ly, lx]
    return ex * ex + ey * ey


def displaced_out_of_bounds(flow) -> np.ndarray:
    """True where round(p + f(p)) falls outside the grid."""
    return _rounded_lookup(_vectors(flow))[2]


def validity_mask(
    error: np.ndarray, delta: float, out_of_bounds: np.ndarray | None = None
) -> ValidityMask:
    """Threshold a consistency-error map: valid iff error < delta (strict).

    Positions flagged in ``out_of_bounds`` are forced invalid.
    """
    if not (np.isfinite(delta) and delta > 0):
        raise InvalidParameter(f"delta must be > 0, got {delta}")
    err = np.asarray(error, dtype=np.float64)
    mask = err < delta
    if out_of_bounds is not None:
        if out_of_bounds.shape != mask.shape:
            raise ShapeMismatch(
                f"out-of-bounds flags {out_of_bounds.shape} do not match "
                f"error map {mask.shape}"
            )
        mask &= ~out_of_bounds
    return ValidityMask(mask=mask, threshold_used=float(delta))


def pair_validity(pair: FlowPair, delta: float) -> tuple[ValidityMask, ValidityMask]:
    """Validity masks for both travel directions of a flow pair.

    The first mask validates pulling content along ``pair.backward`` (used
    when updating the later frame from the earlier one); the second validates
    the mirrored direction.
    """
    fwd = validity_mask(
        consistency_error(pair.forward, pair.backward),
        delta,
        out_of_bounds=displaced_out_of_bounds(pair.forward),
    )
    bwd = validity_mask(
        consistency_error(pair.backward, pair.forward),
        delta,
        out_of_bounds=displaced_out_of_bounds(pair.backward),
    )
    return fwd, bwd


def warp_nearest(frame: np.ndarray, flow) -> np.ndarray:
    """Backward-warp a (C, H, W) frame: out[c, p] = frame[c, round(p + f(p))].

    Lookups are clamped to the grid edge; pair masks are the place where
    out-of-bounds samples get excluded.
    """
    arr = np.asarray(frame)
    if arr.ndim == 2:
        return warp_nearest(arr[None], flow)[0]
    if arr.ndim != 3:
        raise ShapeMismatch(f"expected frame of shape (C, H, W), got {arr.shape}")
    v = _vectors(flow)
    if v.shape[1:] != arr.shape[1:]:
        raise ShapeMismatch(
            f"flow dims {v.shape[1:]} do not match frame dims {arr.shape[1:]}"
        )
    ly, lx, _ = _rounded_lookup(v)
    return arr[:, ly, lx]


def synth_flow(
    kind: str,
    dims: tuple[int, int],
    *,
    dx: float = 0.0,
    dy: float = 0.0,
    angle: float = 0.0,
    scale: float = 1.0,
    center: tuple[float, float] | None = None,
) -> FlowPair:
    """Analytically exact flow pair for a rigid test motion.

    ``kind`` is one of:

    * ``translate``: forward field constant (dx, dy), backward its negation.
    * ``rotate``: rotation by ``angle`` radians about ``center`` (x, y);
      defaults to the grid center ((W-1)/2, (H-1)/2).
    * ``zoom``: scaling by ``scale`` about ``center``.

    The backward field is the exact inverse motion, so integer translations
    have zero consistency error away from the border.
    """
    h, w = dims
    if h < 1 or w < 1:
        raise InvalidParameter(f"dims must be positive, got {dims}")
    params = (dx, dy, angle, scale)
    if not all(np.isfinite(p) for p in params):
        raise InvalidParameter("motion parameters must be finite")

    if kind == "translate":
        fwd = np.empty((2, h, w), dtype=np.float64)
        fwd[0] = dx
        fwd[1] = dy
        bwd = -fwd
    elif kind in ("rotate", "zoom"):
        cx, cy = center if center is not None else ((w - 1) / 2.0, (h - 1) / 2.0)
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        rx, ry = xs - cx, ys - cy
        if kind == "rotate":
            cos, sin = np.cos(angle), np.sin(angle)
            fwd = np.stack([cos * rx - sin * ry - rx, sin * rx + cos * ry - ry])
            bwd = np.stack([cos * rx + sin * ry - rx, -sin * rx + cos * ry - ry])
        else:
            if scale == 0.0:
                raise InvalidParameter("zoom scale must be nonzero")
            fwd = np.stack([(scale - 1.0) * rx, (scale - 1.0) * ry])
            inv = 1.0 / scale
            bwd = np.stack([(inv - 1.0) * rx, (inv - 1.0) * ry])
    else:
        raise InvalidParameter(f"unknown motion kind {kind!r}")

    return FlowPair(
        forward=FlowField(vectors=fwd.astype(np.float32), direction="forward",
                          from_index=0, to_index=1),
        backward=FlowField(vectors=bwd.astype(np.float32), direction="backward",
                           from_index=1, to_index=0),
    )
