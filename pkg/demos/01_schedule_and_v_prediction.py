"""Noise schedules and v-prediction algebra.

Builds the default variance-preserving schedule, checks its identities, and
walks a deterministic sampling trajectory driven by an oracle denoiser.
"""

import numpy as np

import latentvsr as lv

sched = lv.make_schedule()  # scaled_linear, 1000 train steps, 30 inference steps
print("train steps:", sched.t_train)
print("alpha^2 + sigma^2 max deviation from 1:",
      np.max(np.abs(sched.alphas**2 + sched.sigmas**2 - 1.0)))
print("first/last inference steps:", sched.inference_steps[:3], "...",
      sched.inference_steps[-3:])

# forward noising and the v target
rng = np.random.default_rng(0)
z = rng.standard_normal((2, 4, 8, 8))      # (frames, channels, H, W)
eps = rng.standard_normal(z.shape)
t = 500
z_t = lv.diffuse(sched, z, t, eps)
v = lv.v_target(sched, z, eps, t)
print(f"\nat t={t}: alpha={sched.alpha(t):.3f} sigma={sched.sigma(t):.3f}")

# the algebra inverts exactly
z0 = lv.predict_z0(sched, z_t, v, t)
eps_hat = lv.predict_eps(sched, z_t, z0, t)
print("recovered z  max error:", np.max(np.abs(z0 - z)))
print("recovered eps max error:", np.max(np.abs(eps_hat - eps)))

# a full deterministic trajectory: each step projects onto the clean estimate
# and re-noises at the next level; with a perfect estimate it lands exactly
target = rng.standard_normal((1, 4, 8, 8))
state = rng.standard_normal(target.shape)
steps = sched.inference_steps
for i, step in enumerate(steps):
    t_prev = steps[i + 1] if i + 1 < len(steps) else 0
    state = lv.ddim_step(sched, state, target, step, t_prev)
print("\nafter 30 deterministic steps toward a fixed target:")
print("max |state - target| =", np.max(np.abs(state - target)))

# classifier-free guidance is an affine blend of two predictions
v_uncond = rng.standard_normal((1, 4, 4, 4))
v_cond = rng.standard_normal((1, 4, 4, 4))
for scale in (0.0, 1.0, 3.0):
    mixed = lv.cfg_combine(v_uncond, v_cond, scale)
    print(f"guidance scale {scale}: first value {mixed[0, 0, 0, 0]:+.4f}")
