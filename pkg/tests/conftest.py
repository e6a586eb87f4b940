import pytest

from corrval.datagen import SubjectSpec, generate_variant
from corrval.model import segment_correlations
from corrval.patterns import enumerate_patterns

DESK_SEEDS = (6, 7, 8, 9, 10)


@pytest.fixture(scope="session")
def patterns3():
    return enumerate_patterns(3)


@pytest.fixture(scope="session")
def desk_subjects():
    """The five desk-scale normal complete subjects used across the suite."""
    return [generate_variant(SubjectSpec(seed=s), "normal", "complete") for s in DESK_SEEDS]


@pytest.fixture(scope="session")
def desk_corrs(desk_subjects):
    return [segment_correlations(s.ts, s.truth.segmentation) for s in desk_subjects]
