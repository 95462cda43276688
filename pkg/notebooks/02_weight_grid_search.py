"""
Searching ensemble weights on a grid
====================================

Two models score the same 586 samples. We look for the convex weights that
make their averaged score most accurate.
"""

# %%
import time

import numpy as np

from waekit import ensemble, synth
from waekit.core import align
from waekit.metrics import as_percent

sets = synth.reference_fixture(seed=0)
aligned = align(sets)
print(aligned.model_names, aligned.scores.shape)

# %% [markdown]
# The grid holds every weight vector whose entries are multiples of the step
# and sum to one. For two models and a step of 0.005 that is 201 vectors.

# %%
grid = ensemble.enumerate_weight_grid(2, 0.005)
print(len(grid), grid[0].weights, grid[100].weights, grid[-1].weights)
print("four models:", ensemble.grid_size(4, 0.005))

# %% [markdown]
# Applying the fixed 0.45 / 0.55 split gives 578 correct decisions.

# %%
scores, report = ensemble.apply(aligned, (0.45, 0.55))
c = report.counts
print((c.tp, c.fn, c.fp, c.tn), as_percent(report.accuracy))

# %% [markdown]
# The search scores the whole grid. Ties on accuracy go to the higher
# weighted F1, then to the lexicographically smallest weights, so the answer
# never depends on how many worker threads ran.

# %%
t0 = time.perf_counter()
result = ensemble.search(aligned, 0.005, workers=4)
print(f"{time.perf_counter() - t0:.3f}s", result.best_weights.weights, result.best_accuracy * 586)
print("single models:", [round(a * 586) for a in result.per_model_accuracy])

# %% [markdown]
# Accuracy along the grid is a step function. Plotting it (or just printing
# a few points) shows the plateau the chosen weights sit on.

# %%
for k in range(0, 201, 20):
    w = (k / 200, (200 - k) / 200)
    print(w, int(np.round(ensemble.apply(aligned, w)[1].accuracy * 586)))
