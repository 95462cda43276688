"""
Training the classification head
================================

The backbone is frozen, so all we train is a small head on its feature maps.
Here the feature maps are synthetic Gaussian clusters.
"""

# %%
import numpy as np

from waekit import head, synth

features = synth.gen_features(512, 16, 4, 4, separation=4.0, seed=0)
print(features.values.shape, features.labels.mean())

model = head.init_head(16, d_hidden=64, seed=0)
print("trainable parameters:", model.n_trainable())

# %% [markdown]
# Before trusting the backward pass, compare one gradient entry against a
# central difference.

# %%
x = features.values[:8]
y = features.labels[:8]
probe = head.init_head(16, 8, dropout_rate=0.0, seed=1)
_, cache = head.forward(probe, x, "train")
g = head.backward(probe, cache, y)


def loss_with_b2(b2):
    probe.b2 = b2
    p, _ = head.forward(probe, x, "train")
    return head.bce_loss(p, y)


h = 1e-3
numeric = (loss_with_b2(h) - loss_with_b2(-h)) / (2 * h)
probe.b2 = 0.0
print(g["b2"], numeric)

# %% [markdown]
# Training holds out a stratified tenth for validation. The learning rate
# halves after two flat epochs and training stops after five.

# %%
model, history = head.train(features, head.TrainConfig(seed=0))
for rec in history.records:
    print(f"epoch {rec.epoch:2d}  train {rec.train_loss:.4f}  val {rec.val_loss:.4f}"
          f"  acc {rec.val_accuracy:.3f}  lr {rec.learning_rate:g}")
print("best epoch", history.best_epoch)

# %%
probs = head.predict_proba(model, features)
print("accuracy on all features:", np.mean((probs >= 0.5) == (features.labels == 1)))
