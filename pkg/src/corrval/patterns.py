"""Canonical correlation patterns, their PSD-valid relaxed forms and level sets.

A canonical pattern assigns each variate pair one of {-1, 0, 1}. A pattern is
valid when its coefficients can be adjusted within the tolerance bands
[-1, -0.7], [-0.2, 0.2], [0.7, 1] so the full matrix becomes positive
semi-definite. For three variates 23 of the 27 patterns are valid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import CorrelationMatrix

PSD_EIGENVALUE_TOLERANCE = -1e-10

# base-3 digit encoding of ideal coefficients, most significant first
_DIGIT_TO_COEFF = {0: 0, 1: 1, 2: -1}
_COEFF_TO_DIGIT = {0: 0, 1: 1, -1: 2}


@dataclass(frozen=True)
class ToleranceBands:
    negative: tuple = (-1.0, -0.7)
    negligible: tuple = (-0.2, 0.2)
    positive: tuple = (0.7, 1.0)

    def band_for(self, ideal_coefficient):
        if ideal_coefficient == 0:
            return self.negligible
        return self.positive if ideal_coefficient > 0 else self.negative

    def contains(self, ideal, values, tol=1e-9):
        for p, x in zip(ideal, values):
            lo, hi = self.band_for(p)
            if x < lo - tol or x > hi + tol:
                return False
        return True


@dataclass(frozen=True)
class CanonicalPattern:
    """One idealised correlation structure and its PSD-valid relaxed form.

    relaxed is None when no in-band adjustment makes the matrix PSD.
    """

    id: int
    ideal: tuple
    relaxed: CorrelationMatrix | None

    @property
    def is_valid(self):
        return self.relaxed is not None

    @property
    def dimension(self):
        q = len(self.ideal)
        return int(round((1 + np.sqrt(1 + 8 * q)) / 2))


def pattern_id(ideal):
    """Base-3 id of an ideal vector (digits 0->0, 1->1, -1->2, lexicographic)."""
    pid = 0
    for p in ideal:
        pid = pid * 3 + _COEFF_TO_DIGIT[int(p)]
    return pid


def ideal_from_id(pid, n_pairs):
    digits = []
    for _ in range(n_pairs):
        digits.append(pid % 3)
        pid //= 3
    return tuple(_DIGIT_TO_COEFF[d] for d in reversed(digits))


def _to_matrix(coeffs, v):
    m = np.eye(v)
    iu = np.triu_indices(v, k=1)
    m[iu] = coeffs
    m[(iu[1], iu[0])] = coeffs
    return m


def _is_psd(coeffs, v):
    return np.linalg.eigvalsh(_to_matrix(coeffs, v)).min() >= PSD_EIGENVALUE_TOLERANCE


def relax_pattern(ideal, bands=ToleranceBands(), step=0.01):
    """Find an in-band PSD adjustment of an ideal pattern, or None.

    The ideal values are tried first. If not PSD, the magnitudes of the
    strong (+-1) coefficients are walked down in fixed steps, always
    shrinking the currently largest magnitude (ties broken towards the
    later coefficient), until the matrix is PSD or a magnitude would leave
    its band. Negligible coefficients stay at 0. Deterministic by
    construction; for three variates this reproduces the published table
    of relaxed patterns exactly.
    """
    ideal = tuple(int(p) for p in ideal)
    q = len(ideal)
    v = int(round((1 + np.sqrt(1 + 8 * q)) / 2))
    if v * (v - 1) // 2 != q:
        raise ValueError(f"ideal length {q} is not a valid pair count")
    coeffs = np.array(ideal, dtype=np.float64)
    if _is_psd(coeffs, v):
        return CorrelationMatrix(coefficients=coeffs, dimension=v)
    strong = [i for i, p in enumerate(ideal) if p != 0]
    if not strong:
        return None
    magnitudes = {i: 1.0 for i in strong}
    lower = 0.7
    while True:
        largest = max(magnitudes.values())
        i = max(j for j in strong if magnitudes[j] == largest)
        magnitudes[i] = round(magnitudes[i] - step, 10)
        if magnitudes[i] < lower - 1e-12:
            return None
        coeffs = np.array(
            [np.sign(p) * magnitudes.get(j, 0.0) for j, p in enumerate(ideal)]
        )
        if _is_psd(coeffs, v):
            if not bands.contains(ideal, coeffs):
                return None
            return CorrelationMatrix(coefficients=coeffs, dimension=v)


def enumerate_patterns(n_variates, bands=ToleranceBands()):
    """All 3^Q canonical patterns for V variates, each with its relaxed form.

    Supported range is 2 <= V <= 5 to guard against combinatorial blowup
    (Q = 10 and 59049 patterns at V = 5).
    """
    if not 2 <= n_variates <= 5:
        raise ValueError("supported variate counts are 2..5")
    q = n_variates * (n_variates - 1) // 2
    patterns = []
    for pid in range(3**q):
        ideal = ideal_from_id(pid, q)
        patterns.append(CanonicalPattern(id=pid, ideal=ideal, relaxed=relax_pattern(ideal, bands)))
    return patterns


def valid_patterns(patterns):
    return [p for p in patterns if p.is_valid]


def pattern_l1_distance(x, y):
    """L1 distance between the IDEAL coefficient vectors (always an integer)."""
    if not (x.is_valid and y.is_valid):
        raise ValueError("level-set distances are defined over valid patterns only")
    if len(x.ideal) != len(y.ideal):
        raise ValueError("patterns have different variate counts")
    return int(sum(abs(a - b) for a, b in zip(x.ideal, y.ideal)))


@dataclass(frozen=True)
class LevelSetTable:
    """Ordered pattern-id pairs grouped by ideal-vector L1 distance."""

    achievable_distances: tuple
    pairs: dict  # distance -> frozenset of (id_x, id_y)

    def distance_of(self, id_x, id_y):
        for delta, pairset in self.pairs.items():
            if (id_x, id_y) in pairset:
                return delta
        raise KeyError((id_x, id_y))


def build_level_sets(patterns):
    """Group every ordered pair of valid patterns by its L1 distance."""
    valid = valid_patterns(patterns)
    if not valid:
        raise ValueError("need at least one valid pattern")
    groups = {}
    for x in valid:
        for y in valid:
            delta = pattern_l1_distance(x, y)
            groups.setdefault(delta, set()).add((x.id, y.id))
    return LevelSetTable(
        achievable_distances=tuple(sorted(groups)),
        pairs={d: frozenset(s) for d, s in sorted(groups.items())},
    )


def export_pattern_table(patterns, path):
    """JSON array of {id, ideal, relaxed|null}."""
    rows = [
        {
            "id": p.id,
            "ideal": list(p.ideal),
            "relaxed": None if p.relaxed is None else [round(float(x), 10) for x in p.relaxed.coefficients],
        }
        for p in patterns
    ]
    with open(path, "w") as f:
        json.dump(rows, f, indent=1)
        f.write("\n")


def load_pattern_table(path):
    with open(path) as f:
        rows = json.load(f)
    patterns = []
    for row in rows:
        relaxed = row["relaxed"]
        v = int(round((1 + np.sqrt(1 + 8 * len(row["ideal"]))) / 2))
        patterns.append(
            CanonicalPattern(
                id=int(row["id"]),
                ideal=tuple(int(x) for x in row["ideal"]),
                relaxed=None if relaxed is None else CorrelationMatrix(np.array(relaxed), v),
            )
        )
    return patterns
