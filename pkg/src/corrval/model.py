"""Core data model: time series, segmentations, clusterings and Spearman correlation.

Correlation matrices are represented canonically by their upper-triangle
coefficient vector of length Q = V(V-1)/2, ordered lexicographically
(a_12, a_13, ..., a_(V-1)V). The full V x V matrix is materialised only
where eigenvalue work requires it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class CentroidUndefinedError(ValueError):
    """Raised when a centroid is requested for fewer than 2 observations."""


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric unit-diagonal correlation matrix in Q-vector form."""

    coefficients: np.ndarray  # shape (Q,), values in [-1, 1]
    dimension: int

    def __post_init__(self):
        coeffs = _readonly(np.asarray(self.coefficients, dtype=np.float64))
        object.__setattr__(self, "coefficients", coeffs)
        q = self.dimension * (self.dimension - 1) // 2
        if coeffs.shape != (q,):
            raise ValueError(f"expected {q} coefficients for V={self.dimension}, got {coeffs.shape}")
        if np.any(np.isnan(coeffs)):
            raise ValueError("correlation coefficients contain NaN")
        if np.any(np.abs(coeffs) > 1 + 1e-12):
            raise ValueError("correlation coefficients outside [-1, 1]")

    @property
    def n_pairs(self):
        return self.coefficients.shape[0]

    def to_matrix(self):
        """Materialise the full symmetric matrix with unit diagonal."""
        v = self.dimension
        m = np.eye(v)
        iu = np.triu_indices(v, k=1)
        m[iu] = self.coefficients
        m[(iu[1], iu[0])] = self.coefficients
        return m

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        v = m.shape[0]
        return cls(coefficients=m[np.triu_indices(v, k=1)], dimension=v)


@dataclass(frozen=True)
class TimeSeries:
    """T x V observation matrix with strictly time-ascending rows.

    Missing data is represented by row deletion, never by NaN masking.
    """

    observations: np.ndarray
    sample_interval: float = 1.0
    variate_names: tuple = ()
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        obs = _readonly(np.asarray(self.observations, dtype=np.float64))
        object.__setattr__(self, "observations", obs)
        if obs.ndim != 2:
            raise ValueError("observations must be a T x V matrix")
        t, v = obs.shape
        if v < 2 or t < v:
            raise ValueError(f"need T >= V >= 2, got T={t}, V={v}")
        if np.any(np.isnan(obs)):
            raise ValueError("observations contain NaN; delete rows instead")
        names = tuple(self.variate_names) or tuple(f"var_{i + 1}" for i in range(v))
        if len(names) != v:
            raise ValueError("variate_names length does not match V")
        object.__setattr__(self, "variate_names", names)
        if self.timestamps is not None:
            ts = _readonly(np.asarray(self.timestamps, dtype=np.float64))
            if ts.shape != (t,):
                raise ValueError("timestamps length does not match T")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)

    @property
    def n_observations(self):
        return self.observations.shape[0]

    @property
    def n_variates(self):
        return self.observations.shape[1]


@dataclass(frozen=True)
class Segmentation:
    """Strictly increasing boundary sequence: 0 = b_0 < b_1 < ... < b_M = T.

    Segment m (zero-based) covers rows [b_m, b_{m+1}); every segment must
    hold at least 2 observations so its correlation is defined.
    """

    boundaries: tuple

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if len(b) < 2 or b[0] != 0:
            raise ValueError("boundaries must start at 0 and contain at least one segment")
        lengths = np.diff(b)
        if np.any(lengths < 2):
            raise ValueError("every segment must have length >= 2")

    @property
    def n_segments(self):
        return len(self.boundaries) - 1

    @property
    def n_observations(self):
        return self.boundaries[-1]

    def segment_lengths(self):
        return tuple(int(x) for x in np.diff(self.boundaries))


@dataclass(frozen=True)
class Clustering:
    """Assignment of segment index m to cluster id k; every cluster non-empty."""

    assignment: dict = field(default_factory=dict)

    def __post_init__(self):
        a = {int(m): int(k) for m, k in self.assignment.items()}
        object.__setattr__(self, "assignment", a)
        m = len(a)
        if m == 0:
            raise ValueError("clustering must assign at least one segment")
        if sorted(a) != list(range(m)):
            raise ValueError("assignment must cover segment indices 0..M-1 exactly once")

    @property
    def n_segments(self):
        return len(self.assignment)

    @property
    def cluster_ids(self):
        return tuple(sorted(set(self.assignment.values())))

    @property
    def n_clusters(self):
        return len(set(self.assignment.values()))

    def members(self, k):
        return tuple(m for m, c in sorted(self.assignment.items()) if c == k)

    def labels(self):
        """Cluster id per segment, in segment order."""
        return np.array([self.assignment[m] for m in range(self.n_segments)])


@dataclass(frozen=True)
class SegmentedClustering:
    segmentation: Segmentation
    clustering: Clustering

    def __post_init__(self):
        if self.segmentation.n_segments != self.clustering.n_segments:
            raise ValueError("segmentation and clustering disagree on segment count")

    @property
    def n_segments(self):
        return self.segmentation.n_segments

    @property
    def n_clusters(self):
        return self.clustering.n_clusters

    def observation_labels(self):
        """Cluster id per observation, expanded over segment extents."""
        lengths = self.segmentation.segment_lengths()
        return np.repeat(self.clustering.labels(), lengths)


def spearman_correlation(segment):
    """Tie-corrected Spearman correlation of an R x V segment.

    Average ranks are assigned to ties, then Pearson is taken on the ranks.
    Constant-variate convention: a_ij = 0 if exactly one of the pair is
    constant, a_ij = 1 if both are constant. Note the both-constant value of
    1 is deliberate and differs from the usual undefined convention.
    """
    x = np.asarray(segment, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("segment must be an R x V matrix")
    r, v = x.shape
    if r < 2:
        raise ValueError("correlation undefined for fewer than 2 observations")
    ranks = np.column_stack([rankdata(x[:, j], method="average") for j in range(v)])
    constant = np.array([np.all(x[:, j] == x[0, j]) for j in range(v)])
    centered = ranks - ranks.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    q = v * (v - 1) // 2
    coeffs = np.empty(q)
    idx = 0
    for i in range(v):
        for j in range(i + 1, v):
            if constant[i] and constant[j]:
                coeffs[idx] = 1.0
            elif constant[i] or constant[j]:
                coeffs[idx] = 0.0
            else:
                c = float(centered[:, i] @ centered[:, j] / (norms[i] * norms[j]))
                coeffs[idx] = min(1.0, max(-1.0, c))
            idx += 1
    return CorrelationMatrix(coefficients=coeffs, dimension=v)


def segment_views(ts, seg):
    """Slice the observation matrix into the segments defined by seg."""
    if seg.n_observations != ts.n_observations:
        raise ValueError("segmentation does not cover the time series exactly")
    b = seg.boundaries
    return [ts.observations[b[m]:b[m + 1]] for m in range(seg.n_segments)]


def segment_correlations(ts, seg):
    """Per-segment Spearman correlation matrices."""
    return [spearman_correlation(view) for view in segment_views(ts, seg)]


def cluster_centroid(ts, sc, k):
    """Spearman correlation over the pooled rows of all segments in cluster k."""
    members = sc.clustering.members(k)
    if not members:
        raise CentroidUndefinedError(f"cluster {k} is empty")
    views = segment_views(ts, sc.segmentation)
    pooled = np.vstack([views[m] for m in members])
    if pooled.shape[0] < 2:
        raise CentroidUndefinedError(f"cluster {k} pools fewer than 2 observations")
    return spearman_correlation(pooled)


def data_centroid(ts):
    """Spearman correlation over all observations of the time series."""
    return spearman_correlation(ts.observations)


# -- external interfaces ------------------------------------------------------

def write_timeseries_csv(ts, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["timestamp", *ts.variate_names])
        stamps = ts.timestamps
        for t in range(ts.n_observations):
            stamp = int(stamps[t]) if stamps is not None else int(t * ts.sample_interval)
            w.writerow([stamp, *(f"{x:.12g}" for x in ts.observations[t])])


def read_timeseries_csv(path, sample_interval=1.0):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[0] != "timestamp":
            raise ValueError("expected header starting with 'timestamp'")
        names = tuple(header[1:])
        stamps, rows = [], []
        for row in reader:
            stamps.append(_parse_timestamp(row[0]))
            rows.append([float(x) for x in row[1:]])
    return TimeSeries(
        observations=np.array(rows),
        sample_interval=sample_interval,
        variate_names=names,
        timestamps=np.array(stamps),
    )


def _parse_timestamp(token):
    try:
        return float(token)
    except ValueError:
        from datetime import datetime

        return datetime.fromisoformat(token).timestamp()


def write_segmented_clustering_json(sc, path):
    payload = {
        "boundaries": list(sc.segmentation.boundaries),
        "assignment": {str(m): int(k) for m, k in sorted(sc.clustering.assignment.items())},
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def read_segmented_clustering_json(path):
    with open(path) as f:
        payload = json.load(f)
    return SegmentedClustering(
        segmentation=Segmentation(boundaries=tuple(payload["boundaries"])),
        clustering=Clustering(assignment={int(m): int(k) for m, k in payload["assignment"].items()}),
    )
