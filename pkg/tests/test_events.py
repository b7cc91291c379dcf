from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oodhawkes.errors import ConfigError, DataIOError, TaxonomyError
from oodhawkes.events import (EventSequence, Role, Taxonomy, WindowConfig,
                              covariate_pattern_timeline, indicator_set)
from oodhawkes.io import read_sequences, read_taxonomy, write_sequences, write_taxonomy


@st.composite
def sequences(draw, n_types=3, horizon=20.0):
    n = draw(st.integers(0, 25))
    raw = draw(st.lists(st.floats(0.0, horizon, exclude_max=True, allow_nan=False),
                        min_size=n, max_size=n, unique=True))
    times = np.sort(np.array(raw, dtype=float))
    types = np.array(draw(st.lists(st.integers(0, n_types - 1), min_size=n, max_size=n)), dtype=int)
    return EventSequence("h", horizon, times, types)


windows = st.floats(0.01, 5.0, allow_nan=False)


# --- taxonomy and sequences ----------------------------------------------------

def test_taxonomy_roles_and_round_trip():
    tax = Taxonomy.build(2, 1, 1, 1)
    assert [t.role for t in tax.types] == [Role.CAUSE, Role.CAUSE, Role.OUTCOME,
                                           Role.COVARIATE, Role.INTERVENTION]
    assert Taxonomy.from_mapping(tax.to_mapping()) == tax
    assert tax.ids(Role.OUTCOME) == [2]


def test_taxonomy_rejects_sparse_ids_and_unknown_roles():
    with pytest.raises(TaxonomyError):
        Taxonomy.from_mapping({"0": "Cause", "2": "Outcome"})
    with pytest.raises(TaxonomyError):
        Taxonomy.from_mapping({"0": "Treatment"})


def test_sequence_invariants():
    with pytest.raises(ValueError):
        EventSequence("a", 1.0, np.array([0.5, 0.5]), np.array([0, 0]))
    with pytest.raises(ValueError):
        EventSequence("a", 1.0, np.array([1.0]), np.array([0]))
    with pytest.raises(ValueError):
        EventSequence("a", 0.0, np.empty(0), np.empty(0))
    with pytest.raises(TaxonomyError):
        EventSequence("a", 1.0, np.array([0.2]), np.array([5])).validate(Taxonomy.build(1, 1))


def test_window_config_validation():
    with pytest.raises(ConfigError):
        WindowConfig(0.0, 1.0)
    with pytest.raises(ConfigError):
        WindowConfig(1.0, 2.0).check_horizon(1.5)


@given(sequences())
def test_jsonl_round_trip_is_exact(tmp_path_factory, seq):
    path = tmp_path_factory.mktemp("rt") / "s.jsonl"
    write_sequences(path, [seq])
    (back,) = read_sequences(path)
    assert back == seq
    assert back.times.tobytes() == seq.times.tobytes()


def test_taxonomy_file_round_trip(tmp_path):
    tax = Taxonomy.build(3, 2, 1)
    write_taxonomy(tmp_path / "t.json", tax)
    assert read_taxonomy(tmp_path / "t.json") == tax


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataIOError, match="nope.jsonl"):
        read_sequences(tmp_path / "nope.jsonl")


def test_unknown_type_in_file_is_taxonomy_error(tmp_path):
    seq = EventSequence("a", 1.0, np.array([0.1]), np.array([7]))
    write_sequences(tmp_path / "s.jsonl", [seq])
    with pytest.raises(TaxonomyError):
        read_sequences(tmp_path / "s.jsonl", Taxonomy.build(1, 1))


# --- indicator sets ------------------------------------------------------------

def test_indicator_single_event():
    seq = EventSequence("a", 10.0, np.array([1.0]), np.array([0]))
    assert list(indicator_set(seq, [0], 0.5)) == [(1.0, 1.5)]


def test_indicator_no_matching_events():
    seq = EventSequence("a", 10.0, np.array([1.0]), np.array([1]))
    assert indicator_set(seq, [0], 0.5).measure == 0.0


def test_indicator_overlap_merged():
    seq = EventSequence("a", 10.0, np.array([1.0, 1.3]), np.array([0, 0]))
    s = indicator_set(seq, [0], 0.5)
    assert list(s) == [(1.0, 1.8)]
    assert s.measure == pytest.approx(0.8, abs=1e-15)


def test_indicator_clipped_to_horizon():
    seq = EventSequence("a", 10.0, np.array([9.8]), np.array([0]))
    assert list(indicator_set(seq, [0], 1.0)) == [(9.8, 10.0)]


def test_indicator_checks_taxonomy_and_window():
    seq = EventSequence("a", 10.0, np.array([1.0]), np.array([0]))
    with pytest.raises(TaxonomyError):
        indicator_set(seq, [9], 0.5, Taxonomy.build(1, 1))
    with pytest.raises(ConfigError):
        indicator_set(seq, [0], 0.0)


@given(sequences(horizon=1000.0), windows)
def test_indicator_measure_bound(seq, w):
    s = indicator_set(seq, [0], w)
    t = seq.times_of([0])
    assert s.measure <= t.size * w + 1e-9
    isolated = t.size < 2 or np.min(np.diff(t)) >= w
    if isolated and (t.size == 0 or t[-1] + w <= seq.horizon):
        assert s.measure == pytest.approx(t.size * w, rel=1e-12, abs=1e-12)
    if not isolated:
        assert s.measure < t.size * w


@given(sequences(), windows, windows)
def test_indicator_monotone_in_window(seq, w1, w2):
    lo, hi = sorted((w1, w2))
    assert indicator_set(seq, [0, 1], lo).subset_of(indicator_set(seq, [0, 1], hi), tol=1e-12)


# --- covariate patterns --------------------------------------------------------

def test_zero_covariates_is_single_empty_piece():
    seq = EventSequence("a", 5.0, np.array([1.0]), np.array([0]))
    tl = covariate_pattern_timeline(seq, [], 1.0)
    assert tl.keys() == [()]
    assert tl.lengths.tolist() == [5.0]


def test_one_covariate_pattern():
    seq = EventSequence("a", 10.0, np.array([2.0]), np.array([0]))
    tl = covariate_pattern_timeline(seq, [0], 1.0)
    assert tl.edges.tolist() == [0.0, 2.0, 3.0, 10.0]
    assert tl.keys() == [(0,), (1,), (0,)]


def test_two_covariates_disjoint_activity():
    seq = EventSequence("a", 10.0, np.array([1.0, 5.0]), np.array([0, 1]))
    m = covariate_pattern_timeline(seq, [0, 1], 1.0).measure_by_pattern()
    assert m == {(0, 0): 8.0, (1, 0): 1.0, (0, 1): 1.0}


@given(sequences(), windows)
def test_pattern_pieces_partition_horizon(seq, w):
    tl = covariate_pattern_timeline(seq, [0, 1, 2], w)
    assert tl.edges[0] == 0.0 and tl.edges[-1] == seq.horizon
    assert np.all(tl.lengths > 0)
    assert sum(tl.measure_by_pattern().values()) == pytest.approx(seq.horizon, rel=1e-12)
    # every piece agrees with the per-covariate indicator sets
    mids = 0.5 * (tl.edges[:-1] + tl.edges[1:])
    for j in range(3):
        assert np.array_equal(tl.patterns[:, j], indicator_set(seq, [j], w).contains(mids))
