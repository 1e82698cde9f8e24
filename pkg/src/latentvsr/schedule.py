"""Noise schedule construction and v-parameterization algebra.

A schedule is a pair of arrays alpha_t, sigma_t with alpha_t^2 + sigma_t^2 = 1,
derived from a beta sequence via alpha_t = sqrt(prod_{s<=t}(1 - beta_s)).
Index 0 is the clean state (alpha_0 = 1, sigma_0 = 0); indices 1..t_train come
from the beta products. The same arrays drive forward noising
(z_t = alpha_t z + sigma_t eps), the v target (v = alpha_t eps - sigma_t z),
recovery of the clean estimate (z0 = alpha_t z_t - sigma_t v) and the
deterministic update between inference steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivisionByZeroStep,
    InvalidParameter,
    NoiseLevelOutOfRange,
    ShapeMismatch,
)

DEFAULT_T_TRAIN = 1000
DEFAULT_INFERENCE_STEPS = 30
DEFAULT_TAU_MAX = 350
BETA_DEFAULTS = {
    "linear": (0.0001, 0.02),
    "scaled_linear": (0.00085, 0.012),
}

# Placement template for the propagation-step positions, expressed on a
# 28-step run: early {4..7}, middle {14..17}, late {24..27}. Other step
# counts scale these block starts proportionally.
_PLACEMENT_STARTS_28 = {"early": 4, "middle": 14, "late": 24}
_PLACEMENT_BLOCK = 4


@dataclass(frozen=True)
class NoiseSchedule:
    """Discrete variance-preserving noise schedule plus inference-step layout.

    ``alphas``/``sigmas`` have length t_train + 1 (index 0 = clean state).
    ``inference_steps`` is a strictly descending tuple of step indices used at
    sampling time; ``propagation_steps`` is the set of positions into that
    tuple at which latent propagation runs.
    """

    alphas: np.ndarray
    sigmas: np.ndarray
    t_train: int
    inference_steps: tuple[int, ...]
    propagation_steps: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        s = np.asarray(self.sigmas, dtype=np.float64)
        if a.shape != (self.t_train + 1,) or s.shape != a.shape:
            raise InvalidParameter(
                "schedule arrays must have length t_train + 1",
                alphas=a.shape,
                sigmas=s.shape,
            )
        if np.max(np.abs(a**2 + s**2 - 1.0)) > 1e-6:
            raise InvalidParameter("alpha_t^2 + sigma_t^2 must equal 1 within 1e-6")
        if np.any(np.diff(a) > 0):
            raise InvalidParameter("alpha must be monotonically non-increasing")
        if np.any(np.diff(s) < 0):
            raise InvalidParameter("sigma must be monotonically non-decreasing")
        steps = tuple(int(t) for t in self.inference_steps)
        if any(nxt >= cur for cur, nxt in zip(steps, steps[1:])):
            raise InvalidParameter("inference steps must be strictly descending")
        if steps and (steps[0] > self.t_train or steps[-1] < 1):
            raise InvalidParameter("inference steps must lie in [1, t_train]")
        positions = frozenset(int(p) for p in self.propagation_steps)
        if any(p < 0 or p >= len(steps) for p in positions):
            raise InvalidParameter(
                "propagation positions must index into inference_steps",
                positions=sorted(positions),
                num_steps=len(steps),
            )
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "sigmas", s)
        object.__setattr__(self, "inference_steps", steps)
        object.__setattr__(self, "propagation_steps", positions)

    def alpha(self, t: int) -> float:
        self._check_step(t)
        return float(self.alphas[t])

    def sigma(self, t: int) -> float:
        self._check_step(t)
        return float(self.sigmas[t])

    def _check_step(self, t: int) -> None:
        if not 0 <= t <= self.t_train:
            raise InvalidParameter(
                f"step {t} outside [0, {self.t_train}]", step=t
            )

    def with_steps(
        self,
        inference_steps: tuple[int, ...],
        propagation_steps: frozenset[int] = frozenset(),
    ) -> "NoiseSchedule":
        return NoiseSchedule(
            alphas=self.alphas,
            sigmas=self.sigmas,
            t_train=self.t_train,
            inference_steps=inference_steps,
            propagation_steps=propagation_steps,
        )


@dataclass(frozen=True)
class Condition:
    """Denoiser conditioning: optional prompt vector, noise level, guidance.

    ``prompt_embedding = None`` is the null prompt and is distinct from a
    zero vector.
    """

    prompt_embedding: np.ndarray | None = None
    noise_level: int = 0
    guidance_scale: float = 1.0

    def __post_init__(self):
        if self.prompt_embedding is not None:
            emb = np.asarray(self.prompt_embedding, dtype=np.float64)
            if emb.ndim != 1 or emb.size == 0:
                raise InvalidParameter("prompt embedding must be a 1-D vector")
            if not np.all(np.isfinite(emb)):
                raise InvalidParameter("prompt embedding must be finite")
            object.__setattr__(self, "prompt_embedding", emb)
        if self.noise_level < 0:
            raise NoiseLevelOutOfRange(
                f"noise level must be >= 0, got {self.noise_level}"
            )
        if not (np.isfinite(self.guidance_scale) and self.guidance_scale >= 0):
            raise InvalidParameter("guidance scale must be finite and >= 0")

    def without_prompt(self) -> "Condition":
        return Condition(
            prompt_embedding=None,
            noise_level=self.noise_level,
            guidance_scale=self.guidance_scale,
        )


def make_schedule(
    kind: str = "scaled_linear",
    t_train: int = DEFAULT_T_TRAIN,
    *,
    beta_start: float | None = None,
    beta_end: float | None = None,
    num_inference_steps: int = DEFAULT_INFERENCE_STEPS,
    propagation_positions: frozenset[int] | tuple[int, ...] = (),
) -> NoiseSchedule:
    """Build a variance-preserving schedule from a beta sequence.

    ``linear`` spaces beta itself linearly between the endpoints;
    ``scaled_linear`` spaces sqrt(beta) linearly and squares it.
    """
    if kind not in BETA_DEFAULTS:
        raise InvalidParameter(f"unknown schedule kind {kind!r}")
    if t_train < 2:
        raise InvalidParameter(f"t_train must be >= 2, got {t_train}")
    start, end = BETA_DEFAULTS[kind]
    if beta_start is not None:
        start = beta_start
    if beta_end is not None:
        end = beta_end
    if not (0.0 < start < 1.0 and 0.0 < end < 1.0):
        raise InvalidParameter(
            "beta endpoints must lie in (0, 1)", beta_start=start, beta_end=end
        )
    if kind == "linear":
        betas = np.linspace(start, end, t_train, dtype=np.float64)
    else:
        betas = np.linspace(start**0.5, end**0.5, t_train, dtype=np.float64) ** 2
    alphas = np.empty(t_train + 1, dtype=np.float64)
    alphas[0] = 1.0
    alphas[1:] = np.sqrt(np.cumprod(1.0 - betas))
    sigmas = np.sqrt(1.0 - alphas**2)
    return NoiseSchedule(
        alphas=alphas,
        sigmas=sigmas,
        t_train=t_train,
        inference_steps=spaced_steps(t_train, num_inference_steps),
        propagation_steps=frozenset(propagation_positions),
    )


def spaced_steps(t_train: int, count: int) -> tuple[int, ...]:
    """Evenly spaced descending inference steps from t_train down to 1."""
    if count < 1 or count > t_train:
        raise InvalidParameter(
            f"step count must be in [1, {t_train}], got {count}"
        )
    steps = np.round(np.linspace(t_train, 1, count)).astype(int)
    if np.any(np.diff(steps) >= 0):
        raise InvalidParameter(
            f"{count} steps cannot be strictly spaced over [1, {t_train}]"
        )
    return tuple(int(t) for t in steps)


def placement_positions(placement: str, num_steps: int) -> frozenset[int]:
    """Propagation positions for a named placement, scaled to ``num_steps``.

    ``none`` gives the empty set; early/middle/late scale the 28-step
    reference blocks {4..7} / {14..17} / {24..27} proportionally.
    """
    if placement == "none":
        return frozenset()
    if placement not in _PLACEMENT_STARTS_28:
        raise InvalidParameter(f"unknown placement {placement!r}")
    if num_steps < 1:
        raise InvalidParameter("num_steps must be >= 1")
    start = round(_PLACEMENT_STARTS_28[placement] * num_steps / 28)
    start = max(0, min(start, num_steps - 1))
    end = min(start + _PLACEMENT_BLOCK, num_steps)
    return frozenset(range(start, end))


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if np.shape(a) != np.shape(b):
        raise ShapeMismatch(
            f"{what}: shapes {np.shape(a)} and {np.shape(b)} differ"
        )


def diffuse(
    schedule: NoiseSchedule, z: np.ndarray, t: int, eps: np.ndarray
) -> np.ndarray:
    """Forward noising: alpha_t * z + sigma_t * eps."""
    _check_same_shape(z, eps, "diffuse")
    return schedule.alpha(t) * z + schedule.sigma(t) * eps


def v_target(
    schedule: NoiseSchedule, z: np.ndarray, eps: np.ndarray, t: int
) -> np.ndarray:
    """Velocity target: alpha_t * eps - sigma_t * z."""
    _check_same_shape(z, eps, "v_target")
    return schedule.alpha(t) * eps - schedule.sigma(t) * z


def predict_z0(
    schedule: NoiseSchedule, z_t: np.ndarray, v: np.ndarray, t: int
) -> np.ndarray:
    """Clean-latent estimate from a velocity prediction: alpha_t * z_t - sigma_t * v."""
    _check_same_shape(z_t, v, "predict_z0")
    return schedule.alpha(t) * z_t - schedule.sigma(t) * v


def predict_eps(
    schedule: NoiseSchedule, z_t: np.ndarray, z0_hat: np.ndarray, t: int
) -> np.ndarray:
    """Noise estimate implied by a clean estimate: (z_t - alpha_t * z0_hat) / sigma_t."""
    _check_same_shape(z_t, z0_hat, "predict_eps")
    sigma = schedule.sigma(t)
    if sigma == 0.0:
        raise DivisionByZeroStep(f"sigma is 0 at step {t}", step=t)
    return (z_t - schedule.alpha(t) * z0_hat) / sigma


def ddim_step(
    schedule: NoiseSchedule,
    z_t: np.ndarray,
    z0_hat: np.ndarray,
    t: int,
    t_prev: int,
) -> np.ndarray:
    """Deterministic update to the previous step:
    alpha_prev * z0_hat + sigma_prev * predict_eps(z_t, z0_hat, t).
    """
    if t_prev >= t:
        raise InvalidParameter(
            f"t_prev must be < t, got t={t}, t_prev={t_prev}"
        )
    eps = predict_eps(schedule, z_t, z0_hat, t)
    return schedule.alpha(t_prev) * z0_hat + schedule.sigma(t_prev) * eps


def cfg_combine(
    v_uncond: np.ndarray, v_cond: np.ndarray, scale: float
) -> np.ndarray:
    """Classifier-free guidance: v_uncond + scale * (v_cond - v_uncond).

    scale = 0 and scale = 1 return exact copies of the respective input.
    """
    _check_same_shape(v_uncond, v_cond, "cfg_combine")
    if not (np.isfinite(scale) and scale >= 0):
        raise InvalidParameter(f"guidance scale must be >= 0, got {scale}")
    if scale == 0.0:
        return np.array(v_uncond, copy=True)
    if scale == 1.0:
        return np.array(v_cond, copy=True)
    return v_uncond + scale * (v_cond - v_uncond)


def noise_input(
    schedule: NoiseSchedule,
    x: np.ndarray,
    tau: int,
    eps: np.ndarray,
    tau_max: int = DEFAULT_TAU_MAX,
) -> np.ndarray:
    """Noise the conditioning input to level tau: alpha_tau * x + sigma_tau * eps.

    tau = 0 leaves x bitwise unchanged (alpha_0 = 1, sigma_0 = 0).
    """
    _check_same_shape(x, eps, "noise_input")
    if tau_max >= schedule.t_train:
        raise InvalidParameter(
            f"tau_max must be < t_train, got {tau_max} >= {schedule.t_train}"
        )
    if not 0 <= tau <= tau_max:
        raise NoiseLevelOutOfRange(
            f"noise level {tau} outside [0, {tau_max}]", tau=tau, tau_max=tau_max
        )
    if tau == 0:
        return np.array(x, copy=True)
    return schedule.alpha(tau) * x + schedule.sigma(tau) * eps


def prompt_embedding_from_seed(seed: int, dim: int = 16) -> np.ndarray:
    """Deterministic opaque prompt vector: unit-normal draws from a seeded PCG64."""
    if dim < 1:
        raise InvalidParameter("embedding dim must be >= 1")
    return np.random.default_rng(seed).standard_normal(dim)
