"""Discriminative-power evaluation of distance functions.

For one subject and one distance function, the sample set is every
(segment, valid pattern) distance: the empirical segment correlation matrix
against the relaxed pattern. Each sample carries a ground-truth level, the
L1 distance between the ideal vector of the segment's true pattern and the
ideal vector of the compared pattern. A good distance separates these
levels: small at level 0, strictly increasing across levels, spread out
overall, concentrated within a level.

Six criteria summarise this; distances are ranked per criterion with
competition ranking (ties share the top rank, "1224") and compared by
average rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .distances import cross_distances
from .mapping import classify_1nn
from .model import segment_correlations
from .patterns import pattern_l1_distance, valid_patterns

ENTROPY_BINS = 50
MONOTONICITY_CONFIDENCE = 0.99

CRITERION_NAMES = (
    "mean_level0",
    "monotonic",
    "rate_of_increase",
    "overall_entropy",
    "mean_levelset_entropy",
    "macro_f1",
)
# True where larger criterion values are better
CRITERION_DIRECTIONS = {
    "mean_level0": False,
    "monotonic": True,
    "rate_of_increase": True,
    "overall_entropy": True,
    "mean_levelset_entropy": False,
    "macro_f1": True,
}


@dataclass(frozen=True)
class DiscriminationSamples:
    """Normalised distance samples with their ground-truth levels."""

    distance_key: str
    subject_id: str
    values: np.ndarray  # flat, min-max normalised to [0, 1]
    levels: np.ndarray  # same shape, integer level per sample
    macro_f1: float

    @property
    def achievable_levels(self):
        return tuple(int(x) for x in np.unique(self.levels))


def collect_samples(subject, d, patterns, seg_corrs=None):
    """All segment-to-pattern distances of a subject, min-max normalised."""
    valid = sorted(valid_patterns(patterns), key=lambda p: p.id)
    by_id = {p.id: p for p in valid}
    corrs = (
        seg_corrs
        if seg_corrs is not None
        else segment_correlations(subject.ts, subject.truth.segmentation)
    )
    raw = cross_distances(corrs, [p.relaxed for p in valid], d)
    levels = np.array(
        [[pattern_l1_distance(by_id[label], p) for p in valid] for label in subject.labels]
    )
    lo, hi = raw.min(), raw.max()
    values = np.zeros_like(raw) if hi == lo else (raw - lo) / (hi - lo)
    report = classify_1nn(corrs, subject.labels, patterns, d)
    return DiscriminationSamples(
        distance_key=d.key,
        subject_id=subject.subject_id,
        values=values.ravel(),
        levels=levels.ravel(),
        macro_f1=report.macro_f1,
    )


def shannon_entropy(values, bins=ENTROPY_BINS):
    """Shannon entropy (bits) of a fixed-bin histogram over [0, 1]."""
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def level_set_stats(samples):
    """Per-level sample mean, standard deviation, count and entropy."""
    stats = {}
    for level in samples.achievable_levels:
        vals = samples.values[samples.levels == level]
        stats[level] = {
            "mean": float(vals.mean()),
            "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            "count": int(vals.size),
            "entropy": shannon_entropy(vals),
        }
    return stats


def monotonicity_test(samples, confidence=MONOTONICITY_CONFIDENCE):
    """Bonferroni family of one-per-gap normal CIs for level-mean increases.

    For each adjacent achievable level pair the two-sided CI for the mean
    difference is diff +- z * sqrt(s1^2/n1 + s2^2/n2). The distance passes
    when every lower bound is strictly positive.
    """
    stats = level_set_stats(samples)
    levels = sorted(stats)
    z = norm.ppf(1.0 - (1.0 - confidence) / 2.0)
    lower_bounds = []
    for a, b in zip(levels, levels[1:]):
        sa, sb = stats[a], stats[b]
        diff = sb["mean"] - sa["mean"]
        se = np.sqrt(sa["std"] ** 2 / sa["count"] + sb["std"] ** 2 / sb["count"])
        lower_bounds.append(diff - z * se)
    return bool(all(lb > 0 for lb in lower_bounds)), lower_bounds


def rate_of_increase(samples):
    """Mean absolute step between adjacent level means."""
    stats = level_set_stats(samples)
    means = [stats[level]["mean"] for level in sorted(stats)]
    if len(means) < 2:
        return 0.0
    return float(np.mean(np.abs(np.diff(means))))


@dataclass(frozen=True)
class CriterionValues:
    distance_key: str
    subject_id: str
    mean_level0: float
    monotonic: float  # 1.0 pass / 0.0 fail for one subject; a fraction aggregated
    rate_of_increase: float
    overall_entropy: float
    mean_levelset_entropy: float
    macro_f1: float

    def value(self, name):
        return getattr(self, name)


def evaluate_distance(samples):
    """The six criterion values of one distance on one subject."""
    stats = level_set_stats(samples)
    passed, _ = monotonicity_test(samples)
    return CriterionValues(
        distance_key=samples.distance_key,
        subject_id=samples.subject_id,
        mean_level0=stats[0]["mean"] if 0 in stats else float("nan"),
        monotonic=1.0 if passed else 0.0,
        rate_of_increase=rate_of_increase(samples),
        overall_entropy=shannon_entropy(samples.values),
        mean_levelset_entropy=float(np.mean([s["entropy"] for s in stats.values()])),
        macro_f1=samples.macro_f1,
    )


def aggregate_criteria(per_subject):
    """Mean criterion values of one distance across subjects."""
    per_subject = list(per_subject)
    keys = {c.distance_key for c in per_subject}
    if len(keys) != 1:
        raise ValueError("aggregate_criteria mixes distance keys")
    return CriterionValues(
        distance_key=per_subject[0].distance_key,
        subject_id="*",
        **{
            name: float(np.mean([c.value(name) for c in per_subject]))
            for name in CRITERION_NAMES
        },
    )


def competition_ranks(values, higher_is_better):
    """Rank 1 + number of strictly better competitors ("1224" ties)."""
    values = list(values)
    ranks = []
    for v in values:
        better = sum(1 for w in values if (w > v if higher_is_better else w < v))
        ranks.append(1 + better)
    return ranks


@dataclass(frozen=True)
class DistanceRanking:
    distance_key: str
    criterion_ranks: dict  # criterion name -> rank
    average_rank: float
    criteria: CriterionValues


def rank_distance_functions(aggregated):
    """Competition-rank each criterion and sort by average rank.

    aggregated is a list of CriterionValues, one per distance function.
    Returns DistanceRanking objects sorted by ascending average rank, ties
    broken by distance key.
    """
    aggregated = list(aggregated)
    per_criterion = {}
    for name in CRITERION_NAMES:
        per_criterion[name] = competition_ranks(
            [c.value(name) for c in aggregated], CRITERION_DIRECTIONS[name]
        )
    rankings = []
    for i, c in enumerate(aggregated):
        ranks = {name: per_criterion[name][i] for name in CRITERION_NAMES}
        rankings.append(
            DistanceRanking(
                distance_key=c.distance_key,
                criterion_ranks=ranks,
                average_rank=float(np.mean(list(ranks.values()))),
                criteria=c,
            )
        )
    return sorted(rankings, key=lambda r: (r.average_rank, r.distance_key))
