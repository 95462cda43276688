"""Weighted-average ensembling and exhaustive search over the weight simplex.

The search grid is the lattice ``{k / m : k in N^n, sum(k) = m}`` with
``m = 1 / step``. Vectors are built from integer compositions, never by
accumulating ``step``, so every grid vector sums to one up to a single
rounding per component.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .core import DEFAULT_THRESHOLD, AlignedPredictions, _check_unit, labels_from_scores
from .errors import DomainError, UnsupportedArityError
from .metrics import ClassificationReport, accuracy, confusion, evaluate_scores

DEFAULT_STEP = 0.005
MAX_MODELS = 4
SUM_TOL = 1e-9


@dataclass(frozen=True)
class WeightVector:
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w:
            raise DomainError("weight vector is empty")
        if any(not (0.0 <= x <= 1.0) for x in w):
            raise DomainError(f"weights must lie in [0, 1]: {w}")
        if abs(math.fsum(w) - 1.0) > SUM_TOL:
            raise DomainError(f"weights must sum to 1, got {math.fsum(w)!r}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_counts(cls, counts: Sequence[int], m: int) -> "WeightVector":
        return cls(tuple(k / m for k in counts))

    @classmethod
    def normalized(cls, raw: Sequence[float], tol: float = 1e-6) -> "WeightVector":
        """Accept weights that sum to 1 within ``tol`` and rescale them exactly."""
        raw = [float(x) for x in raw]
        total = math.fsum(raw)
        if any(x < 0 for x in raw) or abs(total - 1.0) > tol:
            raise DomainError(f"weights {raw} are not a convex combination (sum {total!r})")
        return cls(tuple(x / total for x in raw))

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=np.float64)


@dataclass(frozen=True)
class SearchResult:
    best_weights: WeightVector
    best_accuracy: float
    best_report: ClassificationReport
    grid_size: int
    per_model_accuracy: tuple[float, ...]
    model_names: tuple[str, ...] = ()
    step: float = DEFAULT_STEP


def _check_weights(aligned: AlignedPredictions, w) -> WeightVector:
    if not isinstance(w, WeightVector):
        w = WeightVector(tuple(w))
    if len(w) != aligned.n_models:
        raise DomainError(f"{len(w)} weights for {aligned.n_models} model columns")
    return w


def combine(aligned: AlignedPredictions, w) -> np.ndarray:
    """Per-sample convex combination of the model scores."""
    w = _check_weights(aligned, w)
    scores = aligned.scores
    out = np.zeros(aligned.n_samples)
    for j, wj in enumerate(w.weights):
        out += wj * scores[:, j]
    # rounding can push a convex combination one ulp outside its hull
    return np.clip(out, scores.min(axis=1), scores.max(axis=1))


def grid_steps(step: float) -> int:
    """Number of lattice steps ``m`` with ``m * step == 1``; rejects non-divisors."""
    step = float(step)
    if not (0.0 < step <= 1.0):
        raise DomainError(f"step must lie in (0, 1], got {step!r}")
    m = round(1.0 / step)
    if abs(1.0 / step - m) > 1e-9 * max(1.0, m):
        raise DomainError(f"step {step!r} does not divide 1 into an integer number of parts")
    return m


def _check_arity(n_models):
    if not (1 <= n_models <= MAX_MODELS):
        raise UnsupportedArityError(
            f"exhaustive weight search supports 1 to {MAX_MODELS} models, got {n_models}"
        )


def grid_size(n_models: int, step: float = DEFAULT_STEP) -> int:
    _check_arity(n_models)
    return math.comb(grid_steps(step) + n_models - 1, n_models - 1)


def composition_grid(n_models: int, m: int) -> np.ndarray:
    """All compositions of ``m`` into ``n_models`` nonnegative parts.

    Rows are in lexicographic order (stars and bars over ordered bar
    positions), shape ``(C(m + n - 1, n - 1), n_models)``, dtype int64.
    """
    _check_arity(n_models)
    if n_models == 1:
        return np.array([[m]], dtype=np.int64)
    slots = m + n_models - 1
    bars = np.array(list(combinations(range(slots), n_models - 1)), dtype=np.int64)
    edges = np.column_stack(
        [np.full(len(bars), -1, dtype=np.int64), bars, np.full(len(bars), slots, dtype=np.int64)]
    )
    return np.diff(edges, axis=1) - 1


def enumerate_weight_grid(n_models: int, step: float = DEFAULT_STEP) -> list[WeightVector]:
    m = grid_steps(step)
    return [WeightVector.from_counts(row, m) for row in composition_grid(n_models, m).tolist()]


def apply(aligned: AlignedPredictions, w, threshold: float = DEFAULT_THRESHOLD):
    """Combined scores and the full evaluation report at ``threshold``."""
    scores = combine(aligned, w)
    return scores, evaluate_scores(aligned.true_labels, scores, threshold)


def _weighted_f1(tp, fn, fp, tn):
    # vectorised twin of metrics.class_metrics + weighted_average
    def f1(a, b, c):
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(a + c > 0, a / np.maximum(a + c, 1), 0.0)
            r = np.where(a + b > 0, a / np.maximum(a + b, 1), 0.0)
            s = p + r
            return np.where(s > 0, 2.0 * p * r / np.where(s > 0, s, 1.0), 0.0)

    n_pos = tp + fn
    n_neg = fp + tn
    return (f1(tp, fn, fp) * n_pos + f1(tn, fp, fn) * n_neg) / (n_pos + n_neg)


def _best_in_chunk(scores, labels, weights, threshold, start):
    """Best (correct, f1, index) within one block of grid rows."""
    combined = np.zeros((scores.shape[0], weights.shape[0]))
    for j in range(scores.shape[1]):
        combined += scores[:, j : j + 1] * weights[None, :, j]
    np.clip(combined, scores.min(axis=1)[:, None], scores.max(axis=1)[:, None], out=combined)
    pred = combined >= threshold
    pos = labels[:, None] == 1
    tp = np.count_nonzero(pred & pos, axis=0)
    fp = np.count_nonzero(pred & ~pos, axis=0)
    n_pos = int(pos.sum())
    fn = n_pos - tp
    tn = (labels.size - n_pos) - fp
    correct = tp + tn
    top = correct.max()
    cand = np.flatnonzero(correct == top)
    f1 = _weighted_f1(tp[cand], fn[cand], fp[cand], tn[cand])
    k = cand[np.flatnonzero(f1 == f1.max())[0]]
    return int(top), float(f1.max()), start + int(k)


def _rank(entry):
    correct, f1, index = entry
    return (-correct, -f1, index)


def search(
    aligned: AlignedPredictions,
    step: float = DEFAULT_STEP,
    threshold: float = DEFAULT_THRESHOLD,
    *,
    workers: int = 1,
    chunk_size: int = 8192,
) -> SearchResult:
    """Exhaustive accuracy maximisation over the weight lattice.

    Ties on accuracy are broken by higher weighted F1, then by the
    lexicographically smallest weight vector. Chunks may be evaluated on
    several threads; the reduction uses that same total order, so the
    result does not depend on ``workers``.
    """
    threshold = _check_unit("threshold", threshold, open_interval=True)
    m = grid_steps(step)
    counts = composition_grid(aligned.n_models, m)
    weights = counts / m
    scores = np.asarray(aligned.scores)
    labels = np.asarray(aligned.true_labels)

    starts = range(0, len(weights), chunk_size)

    def work(start):
        return _best_in_chunk(scores, labels, weights[start : start + chunk_size], threshold, start)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(work, starts))
    else:
        partial = [work(s) for s in starts]
    _, _, best = min(partial, key=_rank)

    best_w = WeightVector.from_counts(counts[best].tolist(), m)
    _, report = apply(aligned, best_w, threshold)
    per_model = tuple(
        accuracy(confusion(labels, labels_from_scores(scores[:, j], threshold)))
        for j in range(aligned.n_models)
    )
    return SearchResult(
        best_weights=best_w,
        best_accuracy=report.accuracy,
        best_report=report,
        grid_size=len(weights),
        per_model_accuracy=per_model,
        model_names=aligned.model_names,
        step=float(step),
    )
