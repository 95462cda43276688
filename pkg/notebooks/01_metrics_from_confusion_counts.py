"""
Classification reports from confusion counts
============================================

A confusion matrix is enough to rebuild every number in a binary
classification report. Here we expand three matrices into decision vectors
and let waekit score them.
"""

# %%
import numpy as np

from waekit.core import Label
from waekit.metrics import ConfusionCounts, as_percent, auc, classification_report, roc_curve

# Counts are (tp, fn, fp, tn) with PNEUMONIA as the positive class.
matrices = {
    "WAE": ConfusionCounts(417, 6, 2, 161),
    "MobileNetV2": ConfusionCounts(413, 10, 7, 156),
    "NASNetMobile": ConfusionCounts(410, 13, 9, 154),
}


def decisions(c):
    truth = np.r_[np.ones(c.tp + c.fn), np.zeros(c.fp + c.tn)].astype(int)
    pred = np.r_[np.ones(c.tp), np.zeros(c.fn), np.ones(c.fp), np.zeros(c.tn)].astype(int)
    return truth, pred


# %% [markdown]
# Each report carries accuracy, per-class precision/recall/F1 and the
# support-weighted average. Percentages are rounded half away from zero.

# %%
for name, counts in matrices.items():
    report = classification_report(*decisions(counts))
    w = [as_percent(x) for x in report.weighted]
    print(f"{name:13s} acc {as_percent(report.accuracy):6.2f}  weighted P/R/F1 {w}")
    for cls in (Label.PNEUMONIA, Label.NORMAL):
        m = report.per_class[cls]
        print(f"    {cls.name:10s} {[as_percent(x) for x in m[:3]]}  support {m.support}")

# %% [markdown]
# Weighted recall always equals accuracy: each class's recall is weighted by
# its own support, so the sum collapses to (tp + tn) / n.

# %%
r = classification_report(*decisions(matrices["NASNetMobile"]))
print(r.weighted.recall, r.accuracy)

# %% [markdown]
# With only hard decisions the ROC curve has a single interior point, and the
# trapezoid under it is the best AUC these counts can support.

# %%
truth, pred = decisions(matrices["WAE"])
scores = np.where(pred == 1, 0.9, 0.1)
curve = roc_curve(scores, truth)
print(curve.points)
print("AUC", round(auc(curve), 5))
