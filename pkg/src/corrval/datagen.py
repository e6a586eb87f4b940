"""Synthetic regime-switching subjects with known correlation ground truth.

A subject is a multivariate time series whose segments each follow one
relaxed canonical pattern, plus the ground-truth segmented clustering and
per-segment pattern labels. Variants derive from the normal stage:
distribution-shifted (non_normal), mean-aggregated (downsampled), and
row-deleted completeness levels. Controlled degraded clusterings provide a
quality spectrum for index evaluation.

All randomness flows through Philox streams keyed by (seed, purpose), so
every artefact is reproducible bit-for-bit from the subject seed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import stats

from .model import Clustering, SegmentedClustering, Segmentation, TimeSeries, spearman_correlation
from .patterns import enumerate_patterns, valid_patterns

STAGES = ("raw", "normal", "non_normal", "downsampled")
COMPLETENESS = {"complete": 1.0, "partial": 0.7, "sparse": 0.1}
DOWNSAMPLE_FACTOR = 60
DEGRADATION_STRATEGIES = ("shift_boundaries", "wrong_clusters", "combined")
DEGRADATION_LEVELS = 22

# marginal families for the distribution shift; config-overridable defaults
GEV_SHAPE = 0.2
GEV_LOC = 0.0
GEV_SCALE = 1.0
NEGBIN_R = 5
NEGBIN_P = 0.3

MAX_SEGMENT_ATTEMPTS = 20
SEGMENT_TOLERANCE = 0.1  # max elementwise Spearman deviation from target


class GenerationError(RuntimeError):
    """A segment failed its empirical-correlation check after all retries."""


def stream(seed, *tags):
    """Philox generator keyed by hashing (seed, tags); portable across platforms."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    key = np.frombuffer(h.digest(), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SubjectSpec:
    seed: int
    subject_id: str = ""
    n_variates: int = 3
    n_segments: int = 100
    segment_length_range: tuple = (300, 3000)

    def __post_init__(self):
        if not self.subject_id:
            object.__setattr__(self, "subject_id", f"subject_{self.seed}")


@dataclass(frozen=True)
class DegradationSpec:
    strategy: str  # one of DEGRADATION_STRATEGIES
    level: int  # 1..22
    seed: int

    def __post_init__(self):
        if self.strategy not in DEGRADATION_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 1 <= self.level <= DEGRADATION_LEVELS:
            raise ValueError("level must be in 1..22")


@dataclass(frozen=True)
class Subject:
    subject_id: str
    ts: TimeSeries
    truth: SegmentedClustering
    labels: tuple  # pattern id per segment
    stage: str = "normal"
    completeness: str = "complete"
    spec: SubjectSpec | None = field(default=None, compare=False)

    @property
    def variant_id(self):
        return f"{self.stage}:{self.completeness}"


@lru_cache(maxsize=None)
def _valid_patterns(n_variates):
    return tuple(sorted(valid_patterns(enumerate_patterns(n_variates)), key=lambda p: p.id))


def spearman_to_pearson(r):
    """Gaussian-copula conversion of Spearman targets to Pearson targets."""
    return 2.0 * np.sin(np.pi * np.asarray(r) / 6.0)


def _mixing_factor(relaxed, n_variates):
    """Factor L with L L^T equal to the Pearson target (eigen clip, jittered)."""
    target = np.eye(n_variates)
    iu = np.triu_indices(n_variates, k=1)
    pearson = spearman_to_pearson(relaxed.coefficients)
    target[iu] = pearson
    target[(iu[1], iu[0])] = pearson
    w, u = np.linalg.eigh(target + 1e-10 * np.eye(n_variates))
    return u * np.sqrt(np.clip(w, 0.0, None))


def _segment_plan(spec):
    """Deterministic segment lengths and pattern labels for one subject."""
    rng = stream(spec.seed, "plan")
    lo, hi = spec.segment_length_range
    lengths = rng.integers(lo, hi + 1, size=spec.n_segments)
    patterns = _valid_patterns(spec.n_variates)
    n_patterns = len(patterns)
    base, extra = divmod(spec.n_segments, n_patterns)
    counts = np.full(n_patterns, base)
    if extra:
        counts[rng.choice(n_patterns, size=extra, replace=False)] += 1
    labels = np.repeat([p.id for p in patterns], counts)
    rng.shuffle(labels)
    return tuple(int(x) for x in lengths), tuple(int(x) for x in labels)


def _generate_segment(pattern, length, rng, n_variates):
    factor = _mixing_factor(pattern.relaxed, n_variates)
    target = pattern.relaxed.coefficients
    for _ in range(MAX_SEGMENT_ATTEMPTS):
        data = rng.standard_normal((length, n_variates)) @ factor.T
        empirical = spearman_correlation(data).coefficients
        if np.all(np.abs(empirical - target) <= SEGMENT_TOLERANCE):
            return data
    raise GenerationError(
        f"segment of pattern {pattern.id} failed the +-{SEGMENT_TOLERANCE} "
        f"check in {MAX_SEGMENT_ATTEMPTS} attempts (length {length})"
    )


def _segment_targets(subject):
    """Relaxed coefficient targets per segment, or None for the raw stage."""
    if subject.stage == "raw":
        return None
    by_id = {p.id: p for p in _valid_patterns(subject.spec.n_variates)}
    return [by_id[label].relaxed.coefficients for label in subject.labels]


def generate_subject(spec, stage="normal"):
    """Build the complete raw- or normal-stage subject for a spec.

    The raw stage shares segmentation and labels with the normal stage but
    contains i.i.d. data with no injected correlation structure.
    """
    if stage not in ("raw", "normal"):
        raise ValueError("generate_subject builds raw or normal stages only")
    lengths, labels = _segment_plan(spec)
    patterns = {p.id: p for p in _valid_patterns(spec.n_variates)}
    blocks = []
    for m, (length, label) in enumerate(zip(lengths, labels)):
        rng = stream(spec.seed, "segment", stage, m)
        if stage == "raw":
            blocks.append(rng.standard_normal((length, spec.n_variates)))
        else:
            blocks.append(_generate_segment(patterns[label], length, rng, spec.n_variates))
    observations = np.vstack(blocks)
    boundaries = (0, *np.cumsum(lengths).tolist())
    ts = TimeSeries(
        observations=observations,
        sample_interval=1.0,
        timestamps=np.arange(observations.shape[0], dtype=np.float64),
    )
    truth = SegmentedClustering(
        segmentation=Segmentation(boundaries=boundaries),
        clustering=Clustering(assignment={m: labels[m] for m in range(spec.n_segments)}),
    )
    return Subject(
        subject_id=spec.subject_id, ts=ts, truth=truth, labels=labels, stage=stage, spec=spec
    )


def _shift_transforms(seed, n_variates):
    """Seed-fixed assignment of marginal families to variate columns."""
    order = stream(seed, "shift_assignment").permutation(n_variates)
    families = ["gev", "nbinom", "normal"] + ["normal"] * max(0, n_variates - 3)
    return dict(zip((int(j) for j in order), families))


def _apply_shift_columns(z, transforms):
    u = stats.norm.cdf(z)
    shifted = np.empty_like(z)
    for j in range(z.shape[1]):
        t = transforms[j]
        if t == "gev":
            shifted[:, j] = stats.genextreme.ppf(u[:, j], c=-GEV_SHAPE, loc=GEV_LOC, scale=GEV_SCALE)
        elif t == "nbinom":
            shifted[:, j] = stats.nbinom.ppf(u[:, j], NEGBIN_R, NEGBIN_P)
        else:
            shifted[:, j] = z[:, j]
    return shifted


def apply_distribution_shift(subject):
    """Shift variate marginals via rank-preserving probability-integral maps.

    One variate becomes generalised-extreme-value, one negative binomial
    (discrete, so ties appear) and one stays normal. The assignment is a
    seed-determined permutation fixed per subject.
    """
    transforms = _shift_transforms(subject.spec.seed, subject.ts.n_variates)
    shifted = _apply_shift_columns(subject.ts.observations, transforms)
    ts = TimeSeries(
        observations=shifted,
        sample_interval=subject.ts.sample_interval,
        variate_names=subject.ts.variate_names,
        timestamps=subject.ts.timestamps,
    )
    return replace(subject, ts=ts, stage="non_normal")


def downsample(subject, factor=DOWNSAMPLE_FACTOR):
    """Mean-aggregate each segment in non-overlapping windows of `factor` rows.

    Trailing remainders within a segment are truncated; boundaries shrink by
    floor division of segment lengths. Any segment collapsing below 2
    post-aggregation rows is an error.
    """
    views = [
        subject.ts.observations[a:b]
        for a, b in zip(subject.truth.segmentation.boundaries, subject.truth.segmentation.boundaries[1:])
    ]
    blocks, lengths = [], []
    for m, view in enumerate(views):
        n_win = view.shape[0] // factor
        if n_win < 2:
            raise ValueError(f"segment {m} collapses below 2 observations at factor {factor}")
        trimmed = view[: n_win * factor]
        blocks.append(trimmed.reshape(n_win, factor, -1).mean(axis=1))
        lengths.append(n_win)
    observations = np.vstack(blocks)
    ts = TimeSeries(
        observations=observations,
        sample_interval=subject.ts.sample_interval * factor,
        variate_names=subject.ts.variate_names,
        timestamps=np.arange(observations.shape[0], dtype=np.float64) * subject.ts.sample_interval * factor,
    )
    truth = SegmentedClustering(
        segmentation=Segmentation(boundaries=(0, *np.cumsum(lengths).tolist())),
        clustering=subject.truth.clustering,
    )
    return replace(subject, ts=ts, truth=truth, stage="downsampled")


def _allocate_kept_counts(lengths, keep_fraction):
    """Largest-remainder allocation of round(keep * T) kept rows, min 2 each."""
    lengths = np.asarray(lengths)
    total_target = int(round(keep_fraction * lengths.sum()))
    exact = keep_fraction * lengths
    counts = np.floor(exact).astype(int)
    counts = np.maximum(counts, 2)
    remainder = total_target - counts.sum()
    if remainder > 0:
        order = np.argsort(-(exact - np.floor(exact)), kind="stable")
        for i in order[:remainder]:
            counts[i] += 1
    elif remainder < 0:
        order = np.argsort(-(counts - 2), kind="stable")
        for i in order:
            if remainder == 0:
                break
            if counts[i] > 2:
                counts[i] -= 1
                remainder += 1
    return counts


def sparsify(subject, keep_fraction, validate=True):
    """Delete rows uniformly at random, keeping >= 2 rows per segment.

    With validate=True each segment's deletion mask is resampled (up to the
    segment attempt budget) until the surviving rows' empirical Spearman
    matrix stays within the generation tolerance of the segment's pattern
    target; the final mask is kept when no attempt passes. The raw stage
    has no targets and always uses the first mask.
    """
    if keep_fraction >= 1.0:
        return replace(subject, completeness="complete")
    rng = stream(subject.spec.seed, "sparsify", subject.stage, keep_fraction)
    seg = subject.truth.segmentation
    lengths = seg.segment_lengths()
    counts = _allocate_kept_counts(lengths, keep_fraction)
    targets = _segment_targets(subject) if validate else None
    kept_rows = []
    for m, (start, count) in enumerate(zip(seg.boundaries, counts)):
        view = subject.ts.observations[start:start + lengths[m]]
        chosen = None
        for _ in range(MAX_SEGMENT_ATTEMPTS):
            chosen = np.sort(rng.choice(lengths[m], size=count, replace=False))
            if targets is None:
                break
            deviation = np.abs(
                spearman_correlation(view[chosen]).coefficients - targets[m]
            ).max()
            if deviation <= SEGMENT_TOLERANCE:
                break
        kept_rows.append(chosen + start)
    rows = np.concatenate(kept_rows)
    ts = TimeSeries(
        observations=subject.ts.observations[rows],
        sample_interval=subject.ts.sample_interval,
        variate_names=subject.ts.variate_names,
        timestamps=subject.ts.timestamps[rows] if subject.ts.timestamps is not None else None,
    )
    truth = SegmentedClustering(
        segmentation=Segmentation(boundaries=(0, *np.cumsum(counts).tolist())),
        clustering=subject.truth.clustering,
    )
    name = {0.7: "partial", 0.1: "sparse"}.get(keep_fraction, f"keep{keep_fraction:g}")
    return replace(subject, ts=ts, truth=truth, completeness=name)


def _generate_downsampled(spec, factor=DOWNSAMPLE_FACTOR):
    """Downsampled-stage subject with per-segment acceptance resampling.

    Each segment is regenerated (draw, shift, aggregate) until the
    aggregated rows' empirical Spearman matrix is within the generation
    tolerance of the target. Aggregated segments are short, so unlike the
    normal stage an exhausted budget is not an error: the final attempt is
    kept, which matches the noise level validated variants show at scale.
    """
    lengths, labels = _segment_plan(spec)
    patterns = {p.id: p for p in _valid_patterns(spec.n_variates)}
    transforms = _shift_transforms(spec.seed, spec.n_variates)
    blocks, new_lengths = [], []
    for m, (length, label) in enumerate(zip(lengths, labels)):
        n_win = length // factor
        if n_win < 2:
            raise ValueError(f"segment {m} collapses below 2 observations at factor {factor}")
        rng = stream(spec.seed, "segment", "downsampled", m)
        pattern = patterns[label]
        mixing = _mixing_factor(pattern.relaxed, spec.n_variates)
        target = pattern.relaxed.coefficients
        aggregated = None
        for _ in range(MAX_SEGMENT_ATTEMPTS):
            z = rng.standard_normal((length, spec.n_variates)) @ mixing.T
            shifted = _apply_shift_columns(z, transforms)
            aggregated = shifted[: n_win * factor].reshape(n_win, factor, -1).mean(axis=1)
            deviation = np.abs(spearman_correlation(aggregated).coefficients - target).max()
            if deviation <= SEGMENT_TOLERANCE:
                break
        blocks.append(aggregated)
        new_lengths.append(n_win)
    observations = np.vstack(blocks)
    interval = 1.0 * factor
    ts = TimeSeries(
        observations=observations,
        sample_interval=interval,
        timestamps=np.arange(observations.shape[0], dtype=np.float64) * interval,
    )
    truth = SegmentedClustering(
        segmentation=Segmentation(boundaries=(0, *np.cumsum(new_lengths).tolist())),
        clustering=Clustering(assignment={m: labels[m] for m in range(spec.n_segments)}),
    )
    return Subject(
        subject_id=spec.subject_id, ts=ts, truth=truth, labels=labels,
        stage="downsampled", spec=spec,
    )


def generate_variant(spec, stage="normal", completeness="complete"):
    """Build one (stage, completeness) variant of a subject from scratch."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if completeness not in COMPLETENESS:
        raise ValueError(f"unknown completeness {completeness!r}")
    if stage == "downsampled":
        subject = _generate_downsampled(spec)
    else:
        subject = generate_subject(spec, stage="raw" if stage == "raw" else "normal")
        if stage == "non_normal":
            subject = apply_distribution_shift(subject)
    return sparsify(subject, COMPLETENESS[completeness])


# -- degraded clusterings -----------------------------------------------------

def _wrong_segment_count(n_segments, level):
    """Linear schedule: all segments wrong at level 1, ~M/22 at level 22."""
    return int(round(n_segments * (DEGRADATION_LEVELS + 1 - level) / DEGRADATION_LEVELS))


def _wrong_assignment(truth, level, seed, pattern_ids):
    """Corrupt a nested, seed-fixed prefix of segments with fixed wrong labels.

    Nesting (level v+1 corrupts a subset of level v's segments) makes the
    Jaccard index monotone in the wrong-segment count by construction.
    """
    m_count = truth.segmentation.n_segments
    order = stream(seed, "degrade_order").permutation(m_count)
    label_rng = stream(seed, "degrade_labels")
    labels = truth.clustering.labels()
    wrong_label = {}
    for m in range(m_count):
        others = [p for p in pattern_ids if p != labels[m]]
        wrong_label[m] = int(others[label_rng.integers(len(others))])
    assignment = dict(truth.clustering.assignment)
    for m in order[: _wrong_segment_count(m_count, level)]:
        assignment[int(m)] = wrong_label[int(m)]
    return Clustering(assignment=assignment)


def _shifted_segmentation(truth, level, seed):
    """Shift interior boundaries forward, magnitude scaling with level."""
    seg = truth.segmentation
    t_total = seg.n_observations
    mean_len = t_total / seg.n_segments
    max_shift = int(np.ceil(level * mean_len / DEGRADATION_LEVELS))
    rng = stream(seed, "degrade_shift", level)
    b = np.array(seg.boundaries)
    shifts = rng.integers(1, max_shift + 1, size=b.shape[0] - 2)
    b[1:-1] = b[1:-1] + shifts
    # repair ordering: backward pass bounds each boundary below its successor
    for i in range(len(b) - 2, 0, -1):
        b[i] = min(b[i], b[i + 1] - 2)
    for i in range(1, len(b) - 1):
        b[i] = max(b[i], b[i - 1] + 2)
    return Segmentation(boundaries=tuple(int(x) for x in b))


def degrade_clustering(truth, dspec, pattern_ids):
    """One controlled-quality degraded segmented clustering (see DegradationSpec)."""
    segmentation = truth.segmentation
    clustering = truth.clustering
    if dspec.strategy in ("shift_boundaries", "combined"):
        segmentation = _shifted_segmentation(truth, dspec.level, dspec.seed)
    if dspec.strategy in ("wrong_clusters", "combined"):
        clustering = _wrong_assignment(truth, dspec.level, dspec.seed, pattern_ids)
    return SegmentedClustering(segmentation=segmentation, clustering=clustering)


def degraded_clusterings(subject):
    """All 66 degraded clusterings (3 strategies x 22 levels) for a subject."""
    pattern_ids = [p.id for p in _valid_patterns(subject.spec.n_variates)]
    out = {}
    for strategy in DEGRADATION_STRATEGIES:
        for level in range(1, DEGRADATION_LEVELS + 1):
            dspec = DegradationSpec(strategy=strategy, level=level, seed=subject.spec.seed)
            out[(strategy, level)] = degrade_clustering(subject.truth, dspec, pattern_ids)
    return out


# -- reduced variants ---------------------------------------------------------

REDUCTION_MODES = ("clusters_50", "clusters_25", "segments_50", "segments_25")


def _subset_subject(subject, kept_segments, suffix):
    seg = subject.truth.segmentation
    b = seg.boundaries
    blocks = [subject.ts.observations[b[m]:b[m + 1]] for m in kept_segments]
    stamps = (
        None
        if subject.ts.timestamps is None
        else np.concatenate([subject.ts.timestamps[b[m]:b[m + 1]] for m in kept_segments])
    )
    lengths = [blocks[i].shape[0] for i in range(len(blocks))]
    ts = TimeSeries(
        observations=np.vstack(blocks),
        sample_interval=subject.ts.sample_interval,
        variate_names=subject.ts.variate_names,
        timestamps=stamps,
    )
    labels = tuple(subject.labels[m] for m in kept_segments)
    truth = SegmentedClustering(
        segmentation=Segmentation(boundaries=(0, *np.cumsum(lengths).tolist())),
        clustering=Clustering(assignment={i: labels[i] for i in range(len(labels))}),
    )
    return replace(
        subject, ts=ts, truth=truth, labels=labels, subject_id=f"{subject.subject_id}:{suffix}"
    )


def reduce_variant(subject, mode, seed=None):
    """Reduced-cluster or reduced-segment version of a subject.

    Cluster modes keep 50% (11 of 23) or 25% (6 of 23) of the patterns
    present and all their segments; segment modes keep 50 or 25 random
    segments, dropping clusters that end up empty.
    """
    if mode not in REDUCTION_MODES:
        raise ValueError(f"unknown reduction mode {mode!r}")
    seed = subject.spec.seed if seed is None else seed
    rng = stream(seed, "reduce", mode)
    labels = np.array(subject.labels)
    if mode.startswith("clusters"):
        present = np.unique(labels)
        # round half down so a 50% reduction of 23 patterns keeps 11, not 12
        n_keep = math.ceil(len(present) * (0.5 if mode.endswith("50") else 0.25) - 0.5)
        kept_patterns = set(rng.choice(present, size=n_keep, replace=False).tolist())
        kept_segments = [m for m in range(len(labels)) if labels[m] in kept_patterns]
    else:
        n_keep = round(len(labels) * (0.5 if mode.endswith("50") else 0.25))
        kept_segments = sorted(rng.choice(len(labels), size=n_keep, replace=False).tolist())
    return _subset_subject(subject, kept_segments, mode)
