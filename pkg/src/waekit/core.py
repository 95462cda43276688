"""Labels, per-model prediction sets and their alignment across models.

PNEUMONIA is the positive class (encoded 1) everywhere in the package,
NORMAL the negative class (encoded 0).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, DomainError, LabelConflictError

DEFAULT_THRESHOLD = 0.5


class Label(enum.IntEnum):
    NORMAL = 0
    PNEUMONIA = 1


def as_label(value) -> Label:
    try:
        return Label(int(value))
    except (ValueError, TypeError):
        raise DomainError(f"not a binary label: {value!r}") from None


def _check_unit(name, x, *, open_interval=False):
    x = float(x)
    if math.isnan(x):
        raise DomainError(f"{name} is NaN")
    if open_interval:
        if not 0.0 < x < 1.0:
            raise DomainError(f"{name} must lie in (0, 1), got {x!r}")
    elif not 0.0 <= x <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def label_from_score(score: float, threshold: float = DEFAULT_THRESHOLD) -> Label:
    """Hard decision for one probability score; ties go to PNEUMONIA."""
    score = _check_unit("score", score)
    threshold = _check_unit("threshold", threshold, open_interval=True)
    return Label.PNEUMONIA if score >= threshold else Label.NORMAL


def labels_from_scores(scores, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Vectorised :func:`label_from_score`; returns an int8 array of 0/1."""
    scores = np.asarray(scores, dtype=np.float64)
    threshold = _check_unit("threshold", threshold, open_interval=True)
    if scores.size and (np.isnan(scores).any() or scores.min() < 0.0 or scores.max() > 1.0):
        raise DomainError("scores must lie in [0, 1]")
    return (scores >= threshold).astype(np.int8)


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    true_label: Label
    score: float

    def __post_init__(self):
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise DomainError("sample_id must be a nonempty string")
        object.__setattr__(self, "true_label", as_label(self.true_label))
        object.__setattr__(self, "score", _check_unit("score", self.score))


@dataclass(frozen=True)
class PredictionSet:
    """One model's scores over a set of uniquely identified samples."""

    model_name: str
    records: tuple[PredictionRecord, ...]

    def __post_init__(self):
        records = tuple(self.records)
        if not records:
            raise DomainError(f"prediction set {self.model_name!r} is empty")
        seen = set()
        for rec in records:
            if rec.sample_id in seen:
                raise DomainError(
                    f"duplicate sample_id {rec.sample_id!r} in {self.model_name!r}"
                )
            seen.add(rec.sample_id)
        object.__setattr__(self, "records", records)

    @classmethod
    def from_arrays(cls, model_name, sample_ids, labels, scores) -> "PredictionSet":
        if not (len(sample_ids) == len(labels) == len(scores)):
            raise DomainError("sample_ids, labels and scores differ in length")
        return cls(
            model_name,
            tuple(
                PredictionRecord(str(s), as_label(y), float(p))
                for s, y, p in zip(sample_ids, labels, scores)
            ),
        )

    def __len__(self):
        return len(self.records)

    @property
    def sample_ids(self) -> list[str]:
        return [r.sample_id for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(r.true_label) for r in self.records], dtype=np.int8)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.records], dtype=np.float64)


@dataclass(frozen=True)
class AlignedPredictions:
    """Scores of several models over a common, sorted sample universe.

    ``scores[i, j]`` is model ``model_names[j]``'s score for ``sample_ids[i]``.
    """

    sample_ids: tuple[str, ...]
    true_labels: np.ndarray
    scores: np.ndarray
    model_names: tuple[str, ...]

    def __post_init__(self):
        labels = np.array(self.true_labels, dtype=np.int8)
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim == 1:
            scores = scores[:, None]
        n = len(self.sample_ids)
        if scores.shape != (n, len(self.model_names)) or labels.shape != (n,):
            raise DomainError(
                f"inconsistent shapes: {n} ids, labels {labels.shape}, scores {scores.shape}"
            )
        labels.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "model_names", tuple(self.model_names))
        object.__setattr__(self, "true_labels", labels)
        object.__setattr__(self, "scores", scores)

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_models(self) -> int:
        return len(self.model_names)

    def column(self, j: int) -> PredictionSet:
        """Project back to a single model's prediction set."""
        return PredictionSet.from_arrays(
            self.model_names[j], self.sample_ids, self.true_labels, self.scores[:, j]
        )

    def __eq__(self, other):
        if not isinstance(other, AlignedPredictions):
            return NotImplemented
        return (
            self.sample_ids == other.sample_ids
            and self.model_names == other.model_names
            and np.array_equal(self.true_labels, other.true_labels)
            and np.array_equal(self.scores, other.scores)
        )

    __hash__ = None


def align(sets: Sequence[PredictionSet] | Iterable[PredictionSet]) -> AlignedPredictions:
    """Join prediction sets on ``sample_id``.

    Rows come out in ascending lexicographic ``sample_id`` order and columns
    in input order, so the result does not depend on record order in any set.
    """
    sets = list(sets)
    if not sets:
        raise DomainError("align needs at least one prediction set")

    lookups = [{r.sample_id: r for r in s.records} for s in sets]
    universe = set().union(*lookups)
    shared = set(lookups[0]).intersection(*lookups[1:])
    missing = sorted(universe - shared)
    if missing:
        detail = []
        for s, lk in zip(sets, lookups):
            absent = [sid for sid in missing if sid not in lk]
            if absent:
                detail.append(f"{s.model_name!r} lacks {', '.join(absent)}")
        raise AlignmentError(
            "sample ids not shared by every set: "
            + ", ".join(missing)
            + " (" + "; ".join(detail) + ")",
            missing,
        )

    ids = sorted(universe)
    labels = np.empty(len(ids), dtype=np.int8)
    scores = np.empty((len(ids), len(sets)), dtype=np.float64)
    for i, sid in enumerate(ids):
        first = lookups[0][sid].true_label
        for j, lk in enumerate(lookups):
            rec = lk[sid]
            if rec.true_label != first:
                raise LabelConflictError(
                    f"sample {sid!r}: {sets[0].model_name!r} says {first.name}, "
                    f"{sets[j].model_name!r} says {rec.true_label.name}"
                )
            scores[i, j] = rec.score
        labels[i] = int(first)
    return AlignedPredictions(tuple(ids), labels, scores, tuple(s.model_name for s in sets))
