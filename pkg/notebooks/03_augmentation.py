"""
Augmenting a grayscale image
============================

Rotation, shift, shear and zoom are folded into one affine map. Every output
pixel is pulled back through that map and sampled bilinearly, with mirrored
edges, before brightness is applied.
"""

# %%
import numpy as np

from waekit.imageprep import AugmentConfig, AugmentParams, apply_augment, augment_batch, preprocess

r, c = np.mgrid[0:40, 0:40]
raw = (((r // 8 + c // 8) % 2) * 200 + 30).astype(np.uint8)
img = preprocess(raw, (64, 64))
print(img.shape, img.dtype, img.min(), img.max())

# %% [markdown]
# An all-zero configuration is the identity, to the bit.

# %%
same = augment_batch([img], AugmentConfig.identity(), seed=0, count_per_image=1)[0]
print(np.array_equal(same, img))

# %% [markdown]
# A single hand-picked transform. Shifting by two whole pixels reflects the
# border instead of filling it with a constant.

# %%
ramp = np.linspace(0, 1, 6)[None, :, None]
print(apply_augment(ramp, AugmentParams(dx=2.0))[0, :, 0].round(2), ramp[0, :, 0].round(2))

rotated = apply_augment(img, AugmentParams(angle_deg=5.0, zoom=1.03, brightness=1.08))
print(rotated.min(), rotated.max())

# %% [markdown]
# Random draws come from per-image substreams of one seed, so the same seed
# gives the same bytes whatever the batch looks like.

# %%
a = augment_batch([img, img[::-1]], AugmentConfig(), seed=7, count_per_image=3)
b = augment_batch([img], AugmentConfig(), seed=7, count_per_image=3)
print(len(a), all(np.array_equal(x, y) for x, y in zip(a, b)))
