"""Recurrent latent propagation on a flickering sequence.

Sixteen latent frames share the same translating content but each carries
independent noise. One bidirectional propagation pass fuses every frame with
its flow-aligned neighbours, and the temporal warping error collapses while
the content survives.
"""

import numpy as np

import latentvsr as lv

num_frames, h, w = 16, 32, 32
stride = 1
rng = np.random.default_rng(42)

# translating panorama + per-frame noise = flicker
pano = rng.random((3, h, w + stride * (num_frames - 1)))
clean = np.stack(
    [pano[:, :, stride * i: stride * i + w] for i in range(num_frames)]
)
noisy = clean + 0.08 * rng.standard_normal(clean.shape)

# content moves left by `stride` px per frame, so the forward flow is -stride
flows = [
    lv.synth_flow("translate", (h, w), dx=-float(stride))
    for _ in range(num_frames - 1)
]


def flicker(latents):
    video = lv.Video(frames=np.clip(latents, 0, 1))
    return lv.warping_error(video, flows, delta=1.0)


config = lv.PropagationConfig(beta=0.5, delta=1.0)
fused = lv.propagate_bidirectional(noisy, flows, config)

print(f"warping error before propagation: {flicker(noisy):8.2f}  (x10^-3)")
print(f"warping error after  propagation: {flicker(fused):8.2f}")
print(f"content drift vs clean scene:     {np.abs(fused - clean).mean():8.4f}"
      f"  (noise std was 0.08)")

# beta controls how much the neighbours win
for beta in (0.0, 0.25, 0.5, 0.9):
    out = lv.propagate_bidirectional(
        noisy, flows, lv.PropagationConfig(beta=beta, delta=1.0)
    )
    print(f"beta={beta:4.2f}: warping error {flicker(out):8.2f}")

# with imperfect flows the threshold becomes the gatekeeper: jittered flow
# pairs have small but nonzero consistency error everywhere, so a tight
# delta empties the masks and propagation leaves the input untouched
jittered = []
for pair in flows:
    wobble = 0.02 * rng.standard_normal(pair.backward.vectors.shape)
    jittered.append(
        lv.FlowPair(
            forward=pair.forward,
            backward=lv.FlowField(
                pair.backward.vectors + wobble.astype(np.float32),
                "backward", pair.backward.from_index, pair.backward.to_index,
            ),
        )
    )
strict = lv.propagate_bidirectional(
    noisy, jittered, lv.PropagationConfig(beta=0.5, delta=1e-9)
)
loose = lv.propagate_bidirectional(
    noisy, jittered, lv.PropagationConfig(beta=0.5, delta=1.0)
)
print("\njittered flows, delta=1e-9: output == input:",
      np.array_equal(strict, noisy))
print(f"jittered flows, delta=1.0 : warping error {flicker(loose):8.2f}")
