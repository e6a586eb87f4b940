"""External and internal validity indices over segmented clusterings.

The objects scored are the per-segment Spearman correlation matrices; all
internal indices are parameterised by a distance function. The adapted
Jaccard index compares observation-level cluster labels directly by id,
which presumes candidate clusterings share the ground truth's label space
(they do here: cluster ids are canonical pattern ids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distances import cross_distances, pairwise_distances
from .model import cluster_centroid, data_centroid, segment_correlations

CENTROID_DISTANCE_FLOOR = 1e-15
INDEX_NAMES = ("jaccard", "swc", "dbi", "vrc", "pbm")


@dataclass(frozen=True)
class IndexResult:
    index_name: str
    value: float
    distance_key: str = ""
    subject_id: str = ""
    variant_id: str = ""


def jaccard_index(truth, candidate, n_observations):
    """Fraction of observations whose cluster id agrees with ground truth."""
    if truth.segmentation.n_observations != n_observations:
        raise ValueError("truth does not cover the stated observation count")
    if candidate.segmentation.n_observations != n_observations:
        raise ValueError("candidate does not cover the stated observation count")
    agree = truth.observation_labels() == candidate.observation_labels()
    return float(agree.sum() / n_observations)


def _cluster_index_lists(sc):
    labels = sc.clustering.labels()
    return {k: np.flatnonzero(labels == k) for k in sc.clustering.cluster_ids}


def swc(ts, sc, d, seg_corrs=None):
    """Mean silhouette over segments; singleton-cluster segments score 0."""
    if sc.n_clusters < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    if sc.n_segments < 2:
        raise ValueError("silhouette needs at least 2 segments")
    corrs = seg_corrs if seg_corrs is not None else segment_correlations(ts, sc.segmentation)
    dist = pairwise_distances(corrs, d)
    members = _cluster_index_lists(sc)
    labels = sc.clustering.labels()
    silhouettes = np.zeros(sc.n_segments)
    for m in range(sc.n_segments):
        own = members[labels[m]]
        if own.size < 2:
            continue  # Rousseeuw convention: singleton silhouette = 0
        a = dist[m, own[own != m]].mean()
        b = min(dist[m, idx].mean() for k, idx in members.items() if k != labels[m])
        denom = max(a, b)
        silhouettes[m] = 0.0 if denom == 0 else (b - a) / denom
    return float(silhouettes.mean())


def _centroids_and_scatter(ts, sc, d, seg_corrs):
    members = _cluster_index_lists(sc)
    centroids = {k: cluster_centroid(ts, sc, k) for k in members}
    scatter = {}
    for k, idx in members.items():
        to_centroid = cross_distances([seg_corrs[m] for m in idx], [centroids[k]], d)[:, 0]
        scatter[k] = float(to_centroid.mean())
    return members, centroids, scatter


def dbi(ts, sc, d, seg_corrs=None):
    """Davies-Bouldin index with a centroid-distance floor for coinciding centroids."""
    if sc.n_clusters < 2:
        raise ValueError("DBI needs at least 2 clusters")
    corrs = seg_corrs if seg_corrs is not None else segment_correlations(ts, sc.segmentation)
    members, centroids, scatter = _centroids_and_scatter(ts, sc, d, corrs)
    ids = list(members)
    centroid_dist = pairwise_distances([centroids[k] for k in ids], d)
    total = 0.0
    for i, k in enumerate(ids):
        ratios = [
            (scatter[k] + scatter[y]) / max(centroid_dist[i, j], CENTROID_DISTANCE_FLOOR)
            for j, y in enumerate(ids)
            if y != k
        ]
        total += max(ratios)
    return float(total / len(ids))


def vrc(ts, sc, d, seg_corrs=None):
    """Calinski-Harabasz variance ratio; +inf when within-cluster variance is 0."""
    k_count = sc.n_clusters
    m_count = sc.n_segments
    if k_count < 2:
        raise ValueError("VRC needs at least 2 clusters")
    if m_count <= k_count:
        raise ValueError("VRC needs more segments than clusters")
    corrs = seg_corrs if seg_corrs is not None else segment_correlations(ts, sc.segmentation)
    members = _cluster_index_lists(sc)
    centroids = {k: cluster_centroid(ts, sc, k) for k in members}
    overall = data_centroid(ts)
    bcv = sum(
        len(idx) * d(centroids[k], overall) ** 2 for k, idx in members.items()
    ) / (k_count - 1)
    wcv = sum(
        float((cross_distances([corrs[m] for m in idx], [centroids[k]], d)[:, 0] ** 2).sum())
        for k, idx in members.items()
    ) / (m_count - k_count)
    if wcv == 0:
        return math.inf
    return float(bcv / wcv)


def pbm(ts, sc, d, seg_corrs=None):
    """Pakhira-Bandyopadhyay-Maulik index with a floored compactness term."""
    k_count = sc.n_clusters
    if k_count < 2:
        raise ValueError("PBM needs at least 2 clusters")
    corrs = seg_corrs if seg_corrs is not None else segment_correlations(ts, sc.segmentation)
    members = _cluster_index_lists(sc)
    centroids = {k: cluster_centroid(ts, sc, k) for k in members}
    overall = data_centroid(ts)
    e_c = sum(
        float(cross_distances([corrs[m] for m in idx], [centroids[k]], d)[:, 0].sum())
        for k, idx in members.items()
    )
    e_c = max(e_c, CENTROID_DISTANCE_FLOOR)
    e_1 = float(cross_distances(corrs, [overall], d)[:, 0].sum())
    ids = list(members)
    centroid_dist = pairwise_distances([centroids[k] for k in ids], d)
    iu = np.triu_indices(len(ids), k=1)
    d_c = float(centroid_dist[iu].max())
    return float(((1.0 / k_count) * (e_1 / e_c) * d_c) ** 2)


_INTERNAL = {"swc": swc, "dbi": dbi, "vrc": vrc, "pbm": pbm}


def evaluate_indices(ts, sc, d, index_names=("swc", "dbi", "vrc", "pbm"), seg_corrs=None):
    """Evaluate several internal indices sharing one set of segment matrices."""
    corrs = seg_corrs if seg_corrs is not None else segment_correlations(ts, sc.segmentation)
    return {name: _INTERNAL[name](ts, sc, d, seg_corrs=corrs) for name in index_names}
