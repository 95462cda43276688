"""Seeded fixture generators: correlated prediction sets and feature batches."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PredictionSet
from .errors import DomainError
from .head import FeatureBatch

REF_N = 586
REF_N_POS = 423


@dataclass(frozen=True)
class ErrorProfile:
    miss_rate: float          # P(wrong | positive)
    false_alarm_rate: float   # P(wrong | negative)


@dataclass(frozen=True)
class SynthSpec:
    n: int = REF_N
    n_pos: int = REF_N_POS
    profiles: tuple = (ErrorProfile(0.03, 0.03), ErrorProfile(0.04, 0.04))
    error_correlation: float = 0.5
    score_margin: float = 0.45
    seed: int = 0
    model_names: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= self.n_pos <= self.n or self.n < 1:
            raise DomainError("need 0 <= n_pos <= n and n >= 1")
        if not self.profiles:
            raise DomainError("need at least one error profile")
        for p in self.profiles:
            for r in (p.miss_rate, p.false_alarm_rate):
                if not 0.0 <= r <= 1.0:
                    raise DomainError(f"error rates must lie in [0, 1], got {r}")
        if not 0.0 <= self.error_correlation <= 1.0:
            raise DomainError("error_correlation must lie in [0, 1]")
        if not 0.0 < self.score_margin < 0.5:
            raise DomainError("score_margin must lie in (0, 0.5)")
        if self.model_names and len(self.model_names) != len(self.profiles):
            raise DomainError("one model name per profile")

    def names(self):
        return self.model_names or tuple(f"model{j}" for j in range(len(self.profiles)))


def sample_ids(n: int) -> list[str]:
    width = max(4, len(str(n - 1)))
    return [f"s{i:0{width}d}" for i in range(n)]


def error_indicators(spec: SynthSpec, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(n, n_models) boolean matrix of which model errs on which sample.

    Common-shock model: each model reads the shared uniform with probability
    ``error_correlation`` and its own uniform otherwise, then errs when that
    uniform falls below its label-conditioned error rate.
    """
    n, k = labels.size, len(spec.profiles)
    shared = rng.random(n)
    own = rng.random((n, k))
    use_shared = rng.random((n, k)) < spec.error_correlation
    u = np.where(use_shared, shared[:, None], own)
    rates = np.array(
        [[p.false_alarm_rate, p.miss_rate] for p in spec.profiles]
    )  # (k, 2) indexed by label
    return u < rates[:, labels].T


def gen_predictions(spec: SynthSpec) -> list[PredictionSet]:
    rng = np.random.default_rng(spec.seed)
    labels = np.zeros(spec.n, dtype=np.int8)
    labels[rng.permutation(spec.n)[: spec.n_pos]] = 1
    wrong = error_indicators(spec, labels, rng)
    u = 1.0 - 0.8 * rng.random(wrong.shape)  # (0.2, 1]
    correct_side = np.where(labels[:, None] == 1, 1.0, -1.0) * np.where(wrong, -1.0, 1.0)
    scores = 0.5 + correct_side * spec.score_margin * u
    ids = sample_ids(spec.n)
    return [
        PredictionSet.from_arrays(name, ids, labels, scores[:, j])
        for j, name in enumerate(spec.names())
    ]


# Target confusion counts (tp, fn, fp, tn) for the reference fixture.
REF_COUNTS = {
    "WAE": (417, 6, 2, 161),
    "MobileNetV2": (413, 10, 7, 156),
    "NASNetMobile": (410, 13, 9, 154),
}
REF_WEIGHTS = (0.45, 0.55)  # MobileNetV2, NASNetMobile


def reference_fixture(seed: int = 0, threshold: float = 0.5) -> list[PredictionSet]:
    """Two score sets with fixed target confusion matrices.

    MobileNetV2 gets 569/586 right, NASNetMobile 564/586, and the 0.45/0.55
    weighted average gets exactly the ensemble's 578/586 decisions. Error
    overlap per class (both wrong, first only, second only):
    positives 6/4/7, negatives 2/5/7.
    """
    rng = np.random.default_rng(seed)
    # (label, wrong_a, wrong_b, count)
    groups = [
        (1, True, True, 6), (1, True, False, 4), (1, False, True, 7), (1, False, False, 406),
        (0, True, True, 2), (0, True, False, 5), (0, False, True, 7), (0, False, False, 149),
    ]
    labels, wa, wb = [], [], []
    for y, a, b, k in groups:
        labels += [y] * k
        wa += [a] * k
        wb += [b] * k
    labels = np.array(labels, dtype=np.int8)
    wa, wb = np.array(wa), np.array(wb)
    n = labels.size

    # distance from the threshold on the correct (+) or wrong (-) side
    def side(wrong, this_wrong_other_right):
        d = rng.uniform(0.2, 0.49, n)
        # a lone wrong model stays close to the threshold so the mix is right
        d = np.where(this_wrong_other_right, rng.uniform(0.01, 0.15, n), d)
        return np.where(wrong, -d, d)

    da = side(wa, wa & ~wb)
    db = side(wb, wb & ~wa)
    sign = np.where(labels == 1, 1.0, -1.0)
    sa = np.round(0.5 + sign * da, 6)
    sb = np.round(0.5 + sign * db, 6)

    perm = rng.permutation(n)
    labels, sa, sb = labels[perm], sa[perm], sb[perm]
    ids = sample_ids(n)

    wa_, wb_ = REF_WEIGHTS
    mix = wa_ * sa + wb_ * sb
    ens_pred = mix >= threshold
    for name, pred in (("MobileNetV2", sa >= threshold), ("NASNetMobile", sb >= threshold), ("WAE", ens_pred)):
        tp = int(np.sum(pred & (labels == 1)))
        fn = int(np.sum(~pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        tn = n - tp - fn - fp
        if (tp, fn, fp, tn) != REF_COUNTS[name]:
            raise RuntimeError(f"fixture construction failed for {name}: {(tp, fn, fp, tn)}")
    if np.min(np.abs(mix - threshold)) <= 1e-3:
        raise RuntimeError("fixture mixture lies too close to the threshold")

    return [
        PredictionSet.from_arrays("MobileNetV2", ids, labels, sa),
        PredictionSet.from_arrays("NASNetMobile", ids, labels, sb),
    ]


def gen_features(n: int, c: int, h: int = 4, w: int = 4, separation: float = 4.0,
                 n_pos: int | None = None, seed: int = 0, noise: float = 1.0) -> FeatureBatch:
    """Gaussian class clusters in channel space, constant over the spatial grid.

    Class means sit at +-separation/2 noise standard deviations along a random
    unit direction; every spatial cell then gets i.i.d. noise.
    """
    if min(n, c, h, w) < 1:
        raise DomainError("n, c, h and w must be positive")
    n_pos = n // 2 if n_pos is None else n_pos
    if not 0 <= n_pos <= n:
        raise DomainError("need 0 <= n_pos <= n")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(c)
    direction /= np.linalg.norm(direction)
    labels = np.zeros(n, dtype=np.int8)
    labels[rng.permutation(n)[:n_pos]] = 1
    offset = np.where(labels == 1, 0.5, -0.5) * separation * noise
    means = offset[:, None] * direction[None, :]
    values = means[:, None, None, :] + noise * rng.standard_normal((n, h, w, c))
    return FeatureBatch(values, labels)
