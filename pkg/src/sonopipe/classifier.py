"""kNN over correlation features, with stratified cross-validation.

The model is a plain stored-sample classifier: Euclidean distance on the
4-dimensional correlation vector, majority vote among the k nearest.
Every tie is broken deterministically:

  - equal distances: the earlier-inserted sample wins the neighbor slot
  - tied vote: the tied class whose nearest member is closest wins,
    and if those distances are also equal, the lowest ordinal wins

Determinism matters because predictions are checked against a brute-force
oracle and cross-validation reports are frozen as regression values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gestures import ALL_GESTURES, GestureLabel


class ModelError(ValueError):
    """Invalid model construction or persistence payload."""


@dataclass(frozen=True)
class LabeledSample:
    features: tuple[float, float, float, float]
    label: GestureLabel
    subject_id: str = ""
    trial_id: str = ""

    def __post_init__(self):
        feats = tuple(float(v) for v in self.features)
        if len(feats) != 4:
            raise ModelError(f"expected 4 features, got {len(feats)}")
        for v in feats:
            if not np.isfinite(v) or v < -1.0 or v > 1.0:
                raise ModelError(f"feature {v} outside [-1, 1]")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", GestureLabel(self.label))


@dataclass(frozen=True)
class KnnModel:
    samples: tuple[LabeledSample, ...]
    k: int
    _matrix: np.ndarray = field(repr=False, compare=False, default=None)
    _labels: np.ndarray = field(repr=False, compare=False, default=None)


def knn_fit(samples, k: int) -> KnnModel:
    samples = tuple(samples)
    if not samples:
        raise ModelError("cannot fit on an empty sample list")
    if k < 1 or k > len(samples):
        raise ModelError(f"k={k} out of range for {len(samples)} samples")
    matrix = np.array([s.features for s in samples], dtype=np.float64)
    labels = np.array([int(s.label) for s in samples], dtype=np.intp)
    return KnnModel(samples=samples, k=k, _matrix=matrix, _labels=labels)


def knn_predict(model: KnnModel, features) -> GestureLabel:
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape != (4,):
        raise ModelError(f"expected 4 features, got shape {feats.shape}")
    diff = model._matrix - feats
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    # Stable sort keeps insertion order among equal distances.
    order = np.argsort(dist, kind="stable")[:model.k]
    votes = np.zeros(4, dtype=np.intp)
    nearest = np.full(4, np.inf)
    for idx in order:
        label = model._labels[idx]
        votes[label] += 1
        if dist[idx] < nearest[label]:
            nearest[label] = dist[idx]
    top = votes.max()
    tied = [c for c in range(4) if votes[c] == top]
    winner = min(tied, key=lambda c: (nearest[c], c))
    return GestureLabel(winner)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of true label (rows) against predicted label (columns).

    labels lists the classes covered, in ordinal order; a rest-excluded
    evaluation carries three labels instead of the usual four.
    """

    labels: tuple[GestureLabel, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        n = len(self.labels)
        if counts.shape != (n, n):
            raise ModelError(f"counts shape {counts.shape} does not match {n} labels")
        if counts.min() < 0:
            raise ModelError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def zeros(cls, labels=ALL_GESTURES) -> "ConfusionMatrix":
        n = len(labels)
        return cls(labels=tuple(labels), counts=np.zeros((n, n), dtype=np.int64))

    def add(self, true: GestureLabel, predicted: GestureLabel) -> "ConfusionMatrix":
        counts = self.counts.copy()
        counts[self.labels.index(true), self.labels.index(predicted)] += 1
        return ConfusionMatrix(self.labels, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def row_sums(self) -> dict[GestureLabel, int]:
        return {l: int(s) for l, s in zip(self.labels, self.counts.sum(axis=1))}

    def to_csv(self) -> str:
        names = [l.wire_name for l in self.labels]
        lines = ["true\\predicted," + ",".join(names)]
        for label, row in zip(self.labels, self.counts):
            lines.append(label.wire_name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def aggregate_confusion(matrices) -> ConfusionMatrix:
    """Elementwise sum of confusion matrices over the same label set."""
    matrices = list(matrices)
    if not matrices:
        raise ModelError("nothing to aggregate")
    labels = matrices[0].labels
    total = np.zeros_like(matrices[0].counts)
    for m in matrices:
        if m.labels != labels:
            raise ModelError(f"label sets differ: {m.labels} vs {labels}")
        total = total + m.counts
    return ConfusionMatrix(labels, total)


@dataclass(frozen=True)
class CvReport:
    folds: int
    per_fold_accuracy: tuple[float, ...]
    accuracy: float
    confusion: ConfusionMatrix
    seed: int
    k: int

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "k": self.k,
            "seed": self.seed,
            "per_fold_accuracy": list(self.per_fold_accuracy),
            "accuracy": self.accuracy,
            "labels": [l.wire_name for l in self.confusion.labels],
            "confusion": self.confusion.counts.tolist(),
        }


def stratified_folds(samples, folds: int, seed: int):
    """Deterministic stratified partition into index lists.

    Each class's indices are shuffled with the seeded generator and dealt
    round-robin, so per-fold class counts stay within one of an even split.
    """
    samples = list(samples)
    if folds < 2:
        raise ModelError("folds must be >= 2")
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(int(s.label), []).append(i)
    for label, indices in by_class.items():
        if len(indices) < folds:
            raise ModelError(
                f"class {GestureLabel(label).wire_name} has {len(indices)} samples, "
                f"fewer than {folds} folds")
    partition = [[] for _ in range(folds)]
    for label in sorted(by_class):
        # Per-class generator: a class's fold assignment must not depend
        # on which other classes are present (e.g. after exclude_class).
        rng = np.random.default_rng([seed, label])
        indices = np.array(by_class[label], dtype=np.intp)
        rng.shuffle(indices)
        for j, idx in enumerate(indices):
            partition[(j + label) % folds].append(int(idx))
    return [sorted(fold) for fold in partition]


def cross_validate(samples, k: int, folds: int, seed: int) -> CvReport:
    """Stratified k-fold cross-validation with an aggregate confusion matrix."""
    samples = list(samples)
    partition = stratified_folds(samples, folds, seed)
    min_train = len(samples) - max(len(fold) for fold in partition)
    if k < 1 or k > min_train:
        raise ModelError(f"k={k} invalid for smallest training split of {min_train}")

    labels = tuple(sorted({s.label for s in samples}))
    confusion = ConfusionMatrix.zeros(labels)
    fold_acc = []
    for fold in partition:
        held_out = set(fold)
        train = [s for i, s in enumerate(samples) if i not in held_out]
        model = knn_fit(train, k)
        hits = 0
        for i in fold:
            predicted = knn_predict(model, samples[i].features)
            confusion = confusion.add(samples[i].label, predicted)
            hits += predicted == samples[i].label
        fold_acc.append(hits / len(fold))
    return CvReport(
        folds=folds,
        per_fold_accuracy=tuple(fold_acc),
        accuracy=confusion.accuracy,
        confusion=confusion,
        seed=seed,
        k=k,
    )


def exclude_class(samples, label: GestureLabel):
    """Drop every sample of the given class, preserving order."""
    remaining = [s for s in samples if s.label != label]
    if not remaining:
        raise ModelError("excluding the class leaves no samples")
    return remaining


def save_model(model: KnnModel, path) -> None:
    payload = {
        "k": model.k,
        "samples": [
            {
                "features": list(s.features),
                "label": s.label.wire_name,
                "subject_id": s.subject_id,
                "trial_id": s.trial_id,
            }
            for s in model.samples
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path) -> KnnModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: malformed model file: {exc}") from exc
    try:
        k = int(payload["k"])
        raw_samples = payload["samples"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"{path}: missing model field: {exc}") from exc
    samples = []
    for entry in raw_samples:
        try:
            samples.append(LabeledSample(
                features=tuple(entry["features"]),
                label=GestureLabel.from_wire(entry["label"]),
                subject_id=str(entry.get("subject_id", "")),
                trial_id=str(entry.get("trial_id", "")),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"{path}: bad sample entry: {exc}") from exc
    return knn_fit(samples, k)
