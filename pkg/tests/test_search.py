import pytest

from pillai_cert.search import (
    CLAIMED_REPRESENTATIONS,
    CORRECTED_REPRESENTATIONS,
    SearchConfig,
    diff_against_claim,
    enumerate_table,
    merge_tables,
    multi_represented,
    table_from_json,
    table_to_csv,
    table_to_json,
    verify_representation,
)
from pillai_cert.sequence import FIBONACCI

THEOREM_SET = {
    -6: [(6, 2), (13, 3)],
    0: [(6, 1), (10, 2)],
    1: [(7, 1), (14, 3)],
    22: [(16, 3), (22, 5)],
    87: [(19, 3), (26, 6)],
}


@pytest.fixture(scope="module")
def theorem_table():
    return enumerate_table(SearchConfig.preset("theorem", 500, 200))


def test_theorem_convention_exact(theorem_table):
    found = {c: [(r.n, r.m) for r in reps] for c, reps in multi_represented(theorem_table)}
    assert found == THEOREM_SET


def test_stated_convention_is_superset():
    table = enumerate_table(SearchConfig.preset("stated", 500, 200))
    found = {c for c, _ in multi_represented(table)}
    assert set(THEOREM_SET) < found
    assert found - set(THEOREM_SET) == {-2, 2, 3, 4, 6}


def test_parallel_matches_serial():
    cfg = SearchConfig.preset("theorem", 300, 120)
    serial = enumerate_table(cfg)
    parallel = enumerate_table(cfg, workers=3)
    assert serial.entries == parallel.entries


def test_merge_of_shards():
    cfg = SearchConfig.preset("theorem", 100, 50)
    parts = [enumerate_table(cfg.with_n_range(5, 40)), enumerate_table(cfg.with_n_range(41, 100))]
    assert merge_tables(parts, cfg).entries == enumerate_table(cfg).entries


def test_empty_range():
    table = enumerate_table(SearchConfig(n_min=5, n_max=0, m_min=1, m_max=0))
    assert len(table) == 0
    assert multi_represented(table) == []


def test_printed_claim_diff():
    table = enumerate_table(SearchConfig.preset("stated", 500, 200))
    report = diff_against_claim(table, CLAIMED_REPRESENTATIONS)
    assert set(report.index_mismatches) == {(22, 20, 5), (87, 24, 6), (87, 17, 3)}
    assert set(report.unclaimed_values) == {-2, 2, 3, 4, 6}
    corrected = diff_against_claim(table, CORRECTED_REPRESENTATIONS)
    assert corrected.index_mismatches == ()


def test_verify_representation():
    assert verify_representation(22, 5, 22)
    assert not verify_representation(20, 5, 22)
    assert not verify_representation(-1, 0, 0)
    assert verify_representation(10, 2, 55 - 9, spec=FIBONACCI)


def test_serialization_round_trip(theorem_table):
    text = table_to_json(theorem_table, threshold=2)
    back = table_from_json(text, theorem_table.config)
    assert {c: back.pairs(c) for c in THEOREM_SET} == THEOREM_SET
    csv_text = table_to_csv(theorem_table, threshold=2)
    assert csv_text.splitlines()[0] == "c,n,m"
    assert "87,26,6" in csv_text


def test_unknown_convention():
    with pytest.raises(ValueError):
        SearchConfig.preset("lenient")
