"""Validation of correlation-based time-series clusterings against canonical patterns."""

from .model import (
    CentroidUndefinedError,
    Clustering,
    CorrelationMatrix,
    SegmentedClustering,
    Segmentation,
    TimeSeries,
    spearman_correlation,
)
from .patterns import (
    CanonicalPattern,
    ToleranceBands,
    build_level_sets,
    enumerate_patterns,
    relax_pattern,
    valid_patterns,
)
from .distances import (
    DISTANCE_KEYS,
    DistanceFunction,
    NumericalDistanceError,
    get_distance,
)
from .mapping import CanonicalPatternClassifier, assign_patterns, classify_1nn
from .indices import INDEX_NAMES, dbi, evaluate_indices, jaccard_index, pbm, swc, vrc
from .datagen import DegradationSpec, Subject, SubjectSpec, generate_variant
from .discrim import collect_samples, evaluate_distance, rank_distance_functions
from .stats import (
    achieved_power,
    correlation_sample_size,
    pearson_correlation,
    step_down,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"

__all__ = [
    "CentroidUndefinedError",
    "Clustering",
    "CorrelationMatrix",
    "SegmentedClustering",
    "Segmentation",
    "TimeSeries",
    "spearman_correlation",
    "CanonicalPattern",
    "ToleranceBands",
    "build_level_sets",
    "enumerate_patterns",
    "relax_pattern",
    "valid_patterns",
    "DISTANCE_KEYS",
    "DistanceFunction",
    "NumericalDistanceError",
    "get_distance",
    "CanonicalPatternClassifier",
    "assign_patterns",
    "classify_1nn",
    "INDEX_NAMES",
    "dbi",
    "evaluate_indices",
    "jaccard_index",
    "pbm",
    "swc",
    "vrc",
    "DegradationSpec",
    "Subject",
    "SubjectSpec",
    "generate_variant",
    "collect_samples",
    "evaluate_distance",
    "rank_distance_functions",
    "achieved_power",
    "correlation_sample_size",
    "pearson_correlation",
    "step_down",
    "wilcoxon_signed_rank",
]
