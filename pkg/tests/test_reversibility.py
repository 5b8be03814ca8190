"""Report accumulation, merging, and the token-by-CS matrix."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from relay.reversibility import CellKey, MissingCellError, ReversibilityReport
from relay.splitter import (
    FAILURE_REASONS,
    VERDICT_NOT_REVERSIBLE,
    VERDICT_REVERSIBLE,
    SplitOutcome,
)

KEY = CellKey(it="#", cs="none", tgt_lang="de", backend="identity")


def _ok(i: int = 0) -> SplitOutcome:
    return SplitOutcome(source_id=f"ok{i}", verdict=VERDICT_REVERSIBLE, components=(("a", "x"), ("b", "y")))


def _bad(reason: str, i: int = 0) -> SplitOutcome:
    return SplitOutcome(source_id=f"bad{i}", verdict=VERDICT_NOT_REVERSIBLE, failure_reason=reason)


def test_rate_arithmetic():
    report = ReversibilityReport()
    for i in range(20):
        report.accumulate(_ok(i), KEY)
    for i in range(80):
        report.accumulate(_bad("it_count_low", i), KEY)
    cell = report.cells[KEY]
    assert cell.total == 100
    assert cell.reversible == 20
    assert cell.rate == pytest.approx(0.20)
    assert cell.failure_histogram["it_count_low"] == 80


def test_histogram_sums_to_failures():
    rng = random.Random(1)
    report = ReversibilityReport()
    for i in range(500):
        if rng.random() < 0.3:
            report.accumulate(_ok(i), KEY)
        else:
            report.accumulate(_bad(rng.choice(FAILURE_REASONS), i), KEY)
    cell = report.cells[KEY]
    assert sum(cell.failure_histogram.values()) == cell.total - cell.reversible


def test_empty_cell_absent():
    report = ReversibilityReport()
    report.accumulate(_ok(), KEY)
    other = CellKey(it="@", cs="none", tgt_lang="de", backend="identity")
    assert other not in report.cells


def test_accumulation_is_order_independent():
    outcomes = [_ok(i) for i in range(10)] + [_bad("it_count_high", i) for i in range(5)]
    forward = ReversibilityReport()
    backward = ReversibilityReport()
    for o in outcomes:
        forward.accumulate(o, KEY)
    for o in reversed(outcomes):
        backward.accumulate(o, KEY)
    assert forward == backward


def test_merge_equals_union():
    keys = [KEY, CellKey(it="@", cs="relation", tgt_lang="vi", backend="noisy")]
    rng = random.Random(3)
    outcomes = [
        (_ok(i) if rng.random() < 0.5 else _bad(rng.choice(FAILURE_REASONS), i), rng.choice(keys))
        for i in range(300)
    ]
    whole = ReversibilityReport()
    for outcome, key in outcomes:
        whole.accumulate(outcome, key)
    left = ReversibilityReport()
    right = ReversibilityReport()
    for i, (outcome, key) in enumerate(outcomes):
        (left if i % 2 else right).accumulate(outcome, key)
    assert left.merge(right) == whole


@settings(max_examples=50, deadline=None)
@given(split=st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=120))
def test_merge_homomorphism_property(split):
    keys = [
        CellKey(it=g, cs=m, tgt_lang="de", backend="b")
        for g in "@#" for m in ("none", "relation")
    ]
    rng = random.Random(42)
    outcomes = []
    for i, shard in enumerate(split):
        outcome = _ok(i) if rng.random() < 0.5 else _bad(rng.choice(FAILURE_REASONS), i)
        outcomes.append((shard, outcome, rng.choice(keys)))
    whole = ReversibilityReport()
    shards = [ReversibilityReport() for _ in range(4)]
    for shard, outcome, key in outcomes:
        whole.accumulate(outcome, key)
        shards[shard].accumulate(outcome, key)
    merged = ReversibilityReport()
    for shard in shards:
        merged.merge(shard)
    assert merged == whole


def test_json_round_trip():
    report = ReversibilityReport()
    for i in range(7):
        report.accumulate(_ok(i), KEY)
    report.accumulate(_bad("empty_component"), KEY)
    data = report.to_json_dict({"config_hash": "deadbeef"})
    assert data["provenance"]["config_hash"] == "deadbeef"
    assert data["cells"][0]["rate"] == round(7 / 8, 4)
    again = ReversibilityReport.from_json_dict(data)
    assert again == report


def _filled_report(rates: dict[tuple[str, str, str], float], per_cell: int = 100) -> ReversibilityReport:
    report = ReversibilityReport()
    for (it, cs, lang), rate in rates.items():
        key = CellKey(it=it, cs=cs, tgt_lang=lang, backend="b")
        good = round(rate * per_cell)
        for i in range(good):
            report.accumulate(_ok(i), key)
        for i in range(per_cell - good):
            report.accumulate(_bad("it_count_low", i), key)
    return report


def test_matrix_single_language_is_identity():
    report = _filled_report({("#", "none", "de"): 0.2, ("@", "none", "de"): 0.8})
    matrix = report.matrix_view(["de"])
    assert matrix.value("#", "none") == pytest.approx(0.2)
    assert matrix.value("@", "none") == pytest.approx(0.8)


def test_matrix_averages_languages_equally():
    report = _filled_report({("#", "none", "de"): 0.2, ("#", "none", "vi"): 0.6})
    matrix = report.matrix_view(["de", "vi"])
    assert matrix.value("#", "none") == pytest.approx(0.4)


def test_matrix_unweighted_despite_cell_sizes():
    report = ReversibilityReport()
    big = CellKey(it="#", cs="none", tgt_lang="de", backend="b")
    small = CellKey(it="#", cs="none", tgt_lang="vi", backend="b")
    for i in range(1000):
        report.accumulate(_ok(i), big)  # rate 1.0, n=1000
    report.accumulate(_ok(0), small)
    report.accumulate(_bad("it_count_low"), small)  # rate 0.5, n=2
    matrix = report.matrix_view(["de", "vi"])
    assert matrix.value("#", "none") == pytest.approx(0.75)


def test_matrix_missing_cell_is_named_error():
    report = _filled_report({("#", "none", "de"): 0.2})
    with pytest.raises(MissingCellError, match="tgt_lang='vi'"):
        report.matrix_view(["de", "vi"])


def test_matrix_requires_single_backend_or_selection():
    report = ReversibilityReport()
    report.accumulate(_ok(), CellKey(it="#", cs="none", tgt_lang="de", backend="m1"))
    report.accumulate(_ok(), CellKey(it="#", cs="none", tgt_lang="de", backend="m2"))
    with pytest.raises(MissingCellError, match="several backends"):
        report.matrix_view(["de"])
    matrix = report.matrix_view(["de"], backend="m1")
    assert matrix.backend == "m1"


def test_matrix_csv_layout():
    report = _filled_report(
        {
            ("#", "none", "de"): 0.25,
            ("#", "relation", "de"): 0.75,
            ("@", "none", "de"): 0.5,
            ("@", "relation", "de"): 1.0,
        }
    )
    csv_text = report.matrix_view(["de"]).to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0] == "it,none,relation"
    assert lines[1] == "#,0.2500,0.7500"
    assert lines[2] == "@,0.5000,1.0000"


def test_cs_column_order_is_none_concat_relation():
    report = _filled_report(
        {("#", m, "de"): 0.5 for m in ("relation", "concat", "none")}
    )
    matrix = report.matrix_view(["de"])
    assert matrix.cs_modes == ("none", "concat", "relation")
