"""Mapping of empirical correlation matrices to canonical patterns.

The mapping is an argmin over the relaxed patterns under a chosen distance
function, with ties broken towards the smallest pattern id. A hardcoded
nearest-neighbour view of the same mapping is evaluated with per-class and
macro F1 scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .distances import cross_distances, get_distance
from .model import Clustering, CorrelationMatrix
from .patterns import enumerate_patterns, valid_patterns


@dataclass(frozen=True)
class PatternAssignment:
    segment_index: int
    pattern_id: int
    distance: float
    runner_up_margin: float  # diagnostic only, no behavioural contract


def _as_matrix_list(matrices, dimension=None):
    out = []
    for m in matrices:
        if isinstance(m, CorrelationMatrix):
            out.append(m)
        else:
            arr = np.asarray(m, dtype=np.float64)
            v = dimension or int(round((1 + np.sqrt(1 + 8 * arr.shape[-1])) / 2))
            out.append(CorrelationMatrix(coefficients=arr, dimension=v))
    return out


def assign_patterns(matrices, patterns, d):
    """Map each correlation matrix to its closest valid pattern.

    Ties are broken towards the smallest pattern id; the ids are sorted so
    the first argmin index realises that rule.
    """
    valid = sorted(valid_patterns(patterns), key=lambda p: p.id)
    if not valid:
        raise ValueError("need at least one valid pattern")
    matrices = _as_matrix_list(matrices, valid[0].dimension)
    dist = cross_distances(matrices, [p.relaxed for p in valid], d)
    assignments = []
    for i, row in enumerate(dist):
        best = int(np.argmin(row))  # first minimum = smallest pattern id
        margin = float(np.partition(row, 1)[1] - row[best]) if row.size > 1 else 0.0
        assignments.append(
            PatternAssignment(
                segment_index=i,
                pattern_id=valid[best].id,
                distance=float(row[best]),
                runner_up_margin=margin,
            )
        )
    return assignments


def map_to_pattern(matrix, patterns, d, segment_index=0):
    """Single-matrix convenience wrapper around assign_patterns."""
    a = assign_patterns([matrix], patterns, d)[0]
    return PatternAssignment(
        segment_index=segment_index,
        pattern_id=a.pattern_id,
        distance=a.distance,
        runner_up_margin=a.runner_up_margin,
    )


def derive_clustering(assignments):
    """Group segments by assigned pattern id; cluster ids ARE the pattern ids."""
    if not assignments:
        raise ValueError("no assignments")
    return Clustering(assignment={a.segment_index: a.pattern_id for a in assignments})


@dataclass(frozen=True)
class ClassificationReport:
    per_class_precision: dict
    per_class_recall: dict
    per_class_f1: dict
    macro_f1: float
    confusion: np.ndarray  # rows = truth, cols = predicted, over class_ids order
    class_ids: tuple


def classify_1nn(matrices, labels, patterns, d):
    """Nearest-pattern classification scored with per-class and macro F1.

    Classes absent from both truth and predictions are excluded from the
    macro average; classes present in truth but never predicted contribute
    an F1 of 0.
    """
    if len(matrices) == 0:
        raise ValueError("empty input")
    labels = [int(x) for x in labels]
    if len(labels) != len(matrices):
        raise ValueError("labels and matrices differ in length")
    predictions = [a.pattern_id for a in assign_patterns(matrices, patterns, d)]
    class_ids = tuple(sorted(set(labels) | set(predictions)))
    index = {c: i for i, c in enumerate(class_ids)}
    confusion = np.zeros((len(class_ids), len(class_ids)), dtype=int)
    for truth, pred in zip(labels, predictions):
        confusion[index[truth], index[pred]] += 1
    precision, recall, f1 = {}, {}, {}
    for c in class_ids:
        i = index[c]
        tp = confusion[i, i]
        fp = confusion[:, i].sum() - tp
        fn = confusion[i, :].sum() - tp
        precision[c] = tp / (tp + fp) if tp + fp else 0.0
        recall[c] = tp / (tp + fn) if tp + fn else 0.0
        f1[c] = (
            2 * precision[c] * recall[c] / (precision[c] + recall[c])
            if precision[c] + recall[c]
            else 0.0
        )
    macro = float(np.mean([f1[c] for c in class_ids]))
    return ClassificationReport(
        per_class_precision=precision,
        per_class_recall=recall,
        per_class_f1=f1,
        macro_f1=macro,
        confusion=confusion,
        class_ids=class_ids,
    )


class CanonicalPatternClassifier(ClassifierMixin, BaseEstimator):
    """Nearest-pattern classifier with a hardcoded neighbour set.

    The neighbours are the relaxed canonical patterns for ``n_variates``;
    fit only builds that table (no training data is consumed). predict
    accepts an (n_samples, Q) array of upper-triangle correlation
    coefficients and returns pattern ids.
    """

    def __init__(self, n_variates=3, distance="l1"):
        self.n_variates = n_variates
        self.distance = distance

    def fit(self, X=None, y=None):
        self.patterns_ = enumerate_patterns(self.n_variates)
        self.valid_patterns_ = sorted(valid_patterns(self.patterns_), key=lambda p: p.id)
        self.classes_ = np.array([p.id for p in self.valid_patterns_])
        self.distance_ = get_distance(self.distance)
        return self

    def _check_fitted(self):
        if not hasattr(self, "valid_patterns_"):
            raise RuntimeError("classifier is not fitted; call fit() first")

    def _check_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        q = self.n_variates * (self.n_variates - 1) // 2
        if X.ndim != 2 or X.shape[1] != q:
            raise ValueError(f"expected (n_samples, {q}) coefficient array, got {X.shape}")
        if np.any(~np.isfinite(X)):
            raise ValueError("input contains non-finite values")
        return X

    def predict(self, X):
        self._check_fitted()
        X = self._check_input(X)
        assignments = assign_patterns(list(X), self.patterns_, self.distance_)
        return np.array([a.pattern_id for a in assignments])

    def transform(self, X):
        """Distances from each sample to every valid pattern (n_samples, L')."""
        self._check_fitted()
        X = self._check_input(X)
        matrices = _as_matrix_list(list(X), self.n_variates)
        return cross_distances(matrices, [p.relaxed for p in self.valid_patterns_], self.distance_)

    def score(self, X, y):
        """Macro F1 of the nearest-pattern assignment against pattern-id labels."""
        self._check_fitted()
        X = self._check_input(X)
        report = classify_1nn(list(X), y, self.patterns_, self.distance_)
        return report.macro_f1


def write_assignments_csv(assignments, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["segment_index", "pattern_id", "distance", "margin"])
        for a in assignments:
            w.writerow([a.segment_index, a.pattern_id, f"{a.distance:.12g}", f"{a.runner_up_margin:.12g}"])
