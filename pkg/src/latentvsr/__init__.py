"""Flow-guided latent-diffusion video upscaling toolkit.

Training-free machinery for a latent-space video upscaler: v-prediction
noise-schedule algebra, forward-backward flow validity checks, recurrent
latent propagation across whole sequences, tiled and segmented diffusion
sampling with pluggable denoisers, Haar wavelet color correction, and a
temporal-consistency evaluation suite.
"""

from . import errors
from .color import color_correct, wavelet_split
from .degrade import degrade
from .flow import (
    FlowPair,
    ValidityMask,
    consistency_error,
    displaced_out_of_bounds,
    pair_validity,
    synth_flow,
    validity_mask,
    warp_nearest,
)
from .metrics import (
    MetricReport,
    compute_report,
    psnr,
    ssim,
    temporal_profile,
    warping_error,
)
from .propagate import (
    PropagationConfig,
    compute_pair_masks,
    propagate,
    propagate_bidirectional,
    propagate_direction,
)
from .sampler import (
    Denoiser,
    OracleDenoiser,
    ProceduralDenoiser,
    SamplePlan,
    SamplerConfig,
    Tile,
    Window,
    as_conditioning_latent,
    blend_tiles,
    merge_segments,
    oracle_denoiser,
    plan_segments,
    plan_tiles,
    procedural_denoiser,
    run_diffusion,
    sample,
    toy_decode,
    toy_encode,
)
from .schedule import (
    Condition,
    NoiseSchedule,
    cfg_combine,
    ddim_step,
    diffuse,
    make_schedule,
    noise_input,
    placement_positions,
    predict_eps,
    predict_z0,
    prompt_embedding_from_seed,
    spaced_steps,
    v_target,
)
from .tensorio import (
    FlowField,
    LatentVideo,
    Video,
    read_flow,
    read_frame_sequence,
    read_latent,
    write_flow,
    write_frame_sequence,
    write_latent,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
