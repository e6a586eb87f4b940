import importlib.resources
import json
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrval.patterns import (
    CanonicalPattern,
    ToleranceBands,
    build_level_sets,
    enumerate_patterns,
    export_pattern_table,
    ideal_from_id,
    load_pattern_table,
    pattern_id,
    pattern_l1_distance,
    relax_pattern,
    valid_patterns,
)

INVALID_IDS_V3 = {14, 16, 22, 26}

# full published table of relaxed values for V=3, keyed by pattern id
RELAXED_V3 = {
    0: (0, 0, 0), 1: (0, 0, 1), 2: (0, 0, -1), 3: (0, 1, 0),
    4: (0, 0.71, 0.7), 5: (0, 0.71, -0.7), 6: (0, -1, 0),
    7: (0, -0.71, 0.7), 8: (0, -0.71, -0.7), 9: (1, 0, 0),
    10: (0.71, 0, 0.7), 11: (0.71, 0, -0.7), 12: (0.71, 0.7, 0),
    13: (1, 1, 1), 15: (0.71, -0.7, 0), 17: (1, -1, -1),
    18: (-1, 0, 0), 19: (-0.71, 0, 0.7), 20: (-0.71, 0, -0.7),
    21: (-0.71, 0.7, 0), 23: (-1, 1, -1), 24: (-0.71, -0.7, 0),
    25: (-1, -1, 1),
}


def test_pattern_id_encoding():
    assert pattern_id((0, 0, 0)) == 0
    assert pattern_id((1, 1, 1)) == 13
    assert pattern_id((-1, -1, -1)) == 26
    assert pattern_id((0, 0, 1)) == 1
    assert pattern_id((1, 1, -1)) == 14


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3))
def test_pattern_id_round_trip(ideal):
    ideal = tuple(ideal)
    assert ideal_from_id(pattern_id(ideal), 3) == ideal


def test_enumerate_patterns_v3_matches_published_table(patterns3):
    t0 = time.perf_counter()
    patterns = enumerate_patterns(3)
    assert time.perf_counter() - t0 < 1.0
    assert len(patterns) == 27
    valid = valid_patterns(patterns)
    assert len(valid) == 23
    assert {p.id for p in patterns if not p.is_valid} == INVALID_IDS_V3
    for p in valid:
        np.testing.assert_allclose(
            p.relaxed.coefficients, RELAXED_V3[p.id], atol=1e-12,
            err_msg=f"pattern {p.id}",
        )


def test_relaxed_patterns_are_psd_and_in_band(patterns3):
    bands = ToleranceBands()
    for p in valid_patterns(patterns3):
        eigenvalues = np.linalg.eigvalsh(p.relaxed.to_matrix())
        assert eigenvalues.min() >= -1e-10
        assert bands.contains(p.ideal, p.relaxed.coefficients)


def test_relax_pattern_invalid_returns_none():
    assert relax_pattern((1, 1, -1)) is None
    assert relax_pattern((-1, -1, -1)) is None


def test_enumerate_patterns_v2_all_valid():
    patterns = enumerate_patterns(2)
    assert len(patterns) == 3
    assert all(p.is_valid for p in patterns)
    with pytest.raises(ValueError):
        enumerate_patterns(1)
    with pytest.raises(ValueError):
        enumerate_patterns(6)


def test_tolerance_bands():
    bands = ToleranceBands()
    assert bands.band_for(0) == (-0.2, 0.2)
    assert bands.band_for(1) == (0.7, 1.0)
    assert bands.band_for(-1) == (-1.0, -0.7)
    assert bands.contains((0, 1, -1), (0.1, 0.75, -0.7))
    assert not bands.contains((0, 1, -1), (0.3, 0.75, -0.7))


def test_pattern_l1_distance_is_ideal_based(patterns3):
    by_id = {p.id: p for p in patterns3}
    assert pattern_l1_distance(by_id[0], by_id[0]) == 0
    assert pattern_l1_distance(by_id[0], by_id[13]) == 3
    assert pattern_l1_distance(by_id[13], by_id[17]) == 4  # (1,1,1) vs (1,-1,-1)
    with pytest.raises(ValueError):
        pattern_l1_distance(by_id[14], by_id[0])


def test_level_sets_partition_all_ordered_pairs(patterns3):
    table = build_level_sets(patterns3)
    total = sum(len(s) for s in table.pairs.values())
    assert total == 23 * 23
    assert table.achievable_distances[0] == 0
    assert len(table.pairs[0]) == 23  # exactly the self-pairs
    assert table.distance_of(0, 13) == 3
    assert table.distance_of(13, 0) == 3
    with pytest.raises(KeyError):
        table.distance_of(0, 14)


def test_export_load_round_trip(tmp_path, patterns3):
    path = tmp_path / "patterns.json"
    export_pattern_table(patterns3, path)
    back = load_pattern_table(path)
    assert len(back) == 27
    for a, b in zip(patterns3, back):
        assert a.id == b.id and a.ideal == b.ideal
        if a.is_valid:
            np.testing.assert_allclose(a.relaxed.coefficients, b.relaxed.coefficients, atol=1e-10)
        else:
            assert b.relaxed is None


def test_bundled_golden_table_matches_enumeration(patterns3):
    data = importlib.resources.files("corrval").joinpath("data/patterns_v3.json")
    rows = json.loads(data.read_text())
    assert len(rows) == 27
    for p, row in zip(patterns3, rows):
        assert p.id == row["id"]
        assert list(p.ideal) == row["ideal"]
        if p.is_valid:
            np.testing.assert_allclose(p.relaxed.coefficients, row["relaxed"], atol=1e-10)
        else:
            assert row["relaxed"] is None
