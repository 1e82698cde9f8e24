"""Recurrent flow-guided propagation of clean-latent estimates.

Each frame's estimate is fused with its already-updated neighbour, warped
into the frame's geometry, wherever the flow passes the forward-backward
consistency check:

    updated_i = where(M_i,
                      beta * warp(updated_{i-1}, f_{i -> i-1})
                      + (1 - beta) * current_i,
                      current_i)

The recurrence runs over the whole sequence, so information travels
arbitrarily far in a single pass. The backward pass mirrors the indices and
uses the opposite flow of each pair; bidirectional propagation feeds the
forward result into the backward pass.

Masks depend only on the flows, never on the latents, so one set is computed
per sequence and shared across all diffusion steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, MissingFlow, ShapeMismatch
from .flow import FlowPair, pair_validity, warp_nearest

DIRECTION_POLICIES = ("forward_then_backward", "forward_only", "backward_only")


@dataclass(frozen=True)
class PropagationConfig:
    """Fusion weight beta, consistency threshold delta, and pass policy."""

    beta: float = 0.5
    delta: float = 1.0
    directions: str = "forward_then_backward"

    def __post_init__(self):
        if not (np.isfinite(self.beta) and 0.0 <= self.beta <= 1.0):
            raise InvalidParameter(f"beta must lie in [0, 1], got {self.beta}")
        if not (np.isfinite(self.delta) and self.delta > 0.0):
            raise InvalidParameter(f"delta must be > 0, got {self.delta}")
        if self.directions not in DIRECTION_POLICIES:
            raise InvalidParameter(
                f"directions must be one of {DIRECTION_POLICIES}"
            )


def compute_pair_masks(
    flows: Sequence[FlowPair], delta: float
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-pair validity masks for the forward and backward passes."""
    fwd_masks, bwd_masks = [], []
    for pair in flows:
        fwd, bwd = pair_validity(pair, delta)
        fwd_masks.append(fwd.mask)
        bwd_masks.append(bwd.mask)
    return fwd_masks, bwd_masks


def _check_inputs(z0_hat: np.ndarray, flows: Sequence[FlowPair]) -> np.ndarray:
    z = np.asarray(z0_hat, dtype=np.float64)
    if z.ndim != 4:
        raise ShapeMismatch(f"expected latents of shape (T, C, H, W), got {z.shape}")
    t = z.shape[0]
    if len(flows) != t - 1:
        raise MissingFlow(
            f"need {t - 1} flow pairs for {t} frames, got {len(flows)}",
            expected=t - 1,
            actual=len(flows),
        )
    for i, pair in enumerate(flows):
        if pair.spatial_shape != z.shape[2:]:
            raise ShapeMismatch(
                f"flow pair {i} dims {pair.spatial_shape} do not match "
                f"latent dims {z.shape[2:]}"
            )
    return z


def propagate_direction(
    z0_hat: np.ndarray,
    flows: Sequence[FlowPair],
    config: PropagationConfig,
    direction: str,
    masks: list[np.ndarray] | None = None,
) -> np.ndarray:
    """One recurrent pass over the sequence ("forward" or "backward").

    The first frame of the pass is left untouched; every later frame is the
    masked beta-blend of its own estimate with the warped, already-updated
    neighbour. beta = 0 returns the input unchanged.
    """
    if direction not in ("forward", "backward"):
        raise InvalidParameter(f"direction must be forward or backward, got {direction!r}")
    z = _check_inputs(z0_hat, flows)
    beta = config.beta
    if beta == 0.0:
        return z.copy()
    if masks is None:
        fwd_masks, bwd_masks = compute_pair_masks(flows, config.delta)
        masks = fwd_masks if direction == "forward" else bwd_masks

    out = z.copy()
    t = z.shape[0]
    if direction == "forward":
        for i in range(1, t):
            warped = warp_nearest(out[i - 1], flows[i - 1].backward)
            fused = beta * warped + (1.0 - beta) * out[i]
            out[i] = np.where(masks[i - 1][None], fused, out[i])
    else:
        for i in range(t - 2, -1, -1):
            warped = warp_nearest(out[i + 1], flows[i].forward)
            fused = beta * warped + (1.0 - beta) * out[i]
            out[i] = np.where(masks[i][None], fused, out[i])
    return out


def propagate_bidirectional(
    z0_hat: np.ndarray,
    flows: Sequence[FlowPair],
    config: PropagationConfig,
    masks: tuple[list[np.ndarray], list[np.ndarray]] | None = None,
) -> np.ndarray:
    """Forward pass followed by a backward pass over its output."""
    fwd_masks, bwd_masks = masks if masks is not None else (None, None)
    out = propagate_direction(z0_hat, flows, config, "forward", masks=fwd_masks)
    return propagate_direction(out, flows, config, "backward", masks=bwd_masks)


def propagate(
    z0_hat: np.ndarray,
    flows: Sequence[FlowPair],
    config: PropagationConfig,
    masks: tuple[list[np.ndarray], list[np.ndarray]] | None = None,
) -> np.ndarray:
    """Apply the configured direction policy."""
    if config.directions == "forward_then_backward":
        return propagate_bidirectional(z0_hat, flows, config, masks=masks)
    fwd_masks, bwd_masks = masks if masks is not None else (None, None)
    if config.directions == "forward_only":
        return propagate_direction(z0_hat, flows, config, "forward", masks=fwd_masks)
    return propagate_direction(z0_hat, flows, config, "backward", masks=bwd_masks)
