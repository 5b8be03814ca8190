"""Metric tests: BLEU against the pinned established-scorer fixture, ROUGE-L
against a brute-force LCS oracle, accuracy, and common-subset extraction."""

from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from relay.metrics import (
    EmptyIntersectionError,
    ScoredCorpus,
    common_subset,
    corpus_bleu,
    corpus_bleu_breakdown,
    label_accuracy,
    rouge_l,
    rouge_l_text,
    tokenize_13a,
)

# Ten-sentence fixture scored once with an established BLEU scorer
# (13a tokenization, no smoothing, case-sensitive); values pinned below.
FIXTURE_HYPS = [
    "The committee approved the budget on Tuesday , despite objections .",
    "A member of my team will execute your orders with immense precision.",
    "He said that the river had risen by 2.5 metres overnight.",
    "Die Katze sitzt auf der Matte und schläft tief.",
    "Results improved by 12 % after the new policy was introduced.",
    "when was francis scott key born",
    "The snippet describes automatic replenishment at a chosen frequency.",
    "Philosophy.com sells skin care, fragrance, perfume and bath products.",
    "Born on August 1, 1779, he became a lawyer in Maryland.",
    "This sequence ends without any overlap whatsoever.",
]
FIXTURE_REFS = [
    "The committee approved the budget on Tuesday despite several objections .",
    "A member of my team will execute your orders with immense precision .",
    "He said the river had risen by 2.5 metres during the night.",
    "Die Katze sitzt auf der Matte und schläft fest.",
    "Results improved by 12 % after the new policy was introduced last year.",
    "when was francis scott key born ?",
    "The snippet describes automatic replenishment at the selected frequency.",
    "philosophy.com sells skin care , fragrance , perfume , bath and more .",
    "Born on August 1 , 1779 , in Frederick County , he became a lawyer in Maryland .",
    "A completely different sentence with no shared words at all.",
]
FIXTURE_SCORE = 65.8015464209
FIXTURE_PRECISIONS = (95 / 110, 75 / 100, 62 / 90, 52 / 80)
FIXTURE_BP = 0.8966489003
FIXTURE_LENS = (110, 122)


def test_bleu_matches_pinned_oracle():
    breakdown = corpus_bleu_breakdown(FIXTURE_HYPS, FIXTURE_REFS)
    assert breakdown.score == pytest.approx(FIXTURE_SCORE, abs=1e-4)
    assert breakdown.precisions == pytest.approx(FIXTURE_PRECISIONS, abs=1e-9)
    assert breakdown.brevity_penalty == pytest.approx(FIXTURE_BP, abs=1e-9)
    assert (breakdown.hyp_len, breakdown.ref_len) == FIXTURE_LENS
    assert breakdown.correct == (95, 75, 62, 52)
    assert breakdown.total == (110, 100, 90, 80)


def test_bleu_self_evaluation_is_exactly_100():
    assert corpus_bleu(FIXTURE_HYPS, FIXTURE_HYPS) == 100.0


def test_bleu_no_shared_unigram_is_zero():
    assert corpus_bleu(["aaa bbb ccc ddd eee"], ["vvv www xxx yyy zzz"]) == 0.0


def test_bleu_zero_fourgram_overlap_is_zero_without_smoothing():
    # unigrams overlap but no 4-gram does, and no smoothing is applied
    assert corpus_bleu(["a b c x d e f"], ["a q b r c s d t e u f"]) == 0.0


def test_bleu_is_order_invariant():
    paired = list(zip(FIXTURE_HYPS, FIXTURE_REFS))
    rng = random.Random(5)
    for _ in range(5):
        rng.shuffle(paired)
        hyps, refs = zip(*paired)
        assert corpus_bleu(list(hyps), list(refs)) == pytest.approx(FIXTURE_SCORE, abs=1e-9)


def test_bleu_brevity_penalty_applies_only_when_short():
    long_hyp = corpus_bleu_breakdown(["the cat sat on the mat today"], ["the cat sat on the mat"])
    assert long_hyp.brevity_penalty == 1.0
    short_hyp = corpus_bleu_breakdown(["the cat sat on the"], ["the cat sat on the mat"])
    assert 0.0 < short_hyp.brevity_penalty < 1.0


def test_bleu_input_validation():
    with pytest.raises(ValueError):
        corpus_bleu(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        corpus_bleu([], [])


def test_tokenize_13a_rules():
    assert tokenize_13a("He said: it works.") == ["He", "said", ":", "it", "works", "."]
    # period/comma stay attached inside numbers
    assert tokenize_13a("price 2.5, up 3,000") == ["price", "2.5", ",", "up", "3,000"]
    # dash after a digit splits, dash between letters does not
    assert tokenize_13a("a-b 3-4") == ["a-b", "3", "-", "4"]
    # symbols split, entities unescape
    assert tokenize_13a("x&lt;y &amp; &quot;q&quot;") == ["x", "<", "y", "&", '"', "q", '"']
    assert tokenize_13a("Philosophy.com rocks") == ["Philosophy", ".", "com", "rocks"]
    assert tokenize_13a("café-au-lait costs $3.50, right?") == [
        "café-au-lait", "costs", "$", "3.50", ",", "right", "?",
    ]


def test_rouge_identical_is_one():
    tokens = "when was francis scott key born".split()
    assert rouge_l(tokens, tokens) == 1.0


def test_rouge_disjoint_is_zero():
    assert rouge_l(["a", "b"], ["c", "d"]) == 0.0


def test_rouge_worked_example():
    # LCS("the cat sat", "the cat was sat") = 3; P=1.0, R=0.75, beta=1.2
    expected = (1 + 1.44) * 1.0 * 0.75 / (0.75 + 1.44 * 1.0)
    assert rouge_l("the cat sat".split(), "the cat was sat".split()) == pytest.approx(expected)
    assert expected == pytest.approx(0.8356, abs=1e-4)


def test_rouge_empty_inputs_score_zero():
    assert rouge_l([], ["x"]) == 0.0
    assert rouge_l(["x"], []) == 0.0
    assert rouge_l_text("", "anything") == 0.0


def test_rouge_text_lowercases_and_splits():
    assert rouge_l_text("The Cat SAT", "the cat sat") == 1.0


def _brute_force_lcs(a: list[str], b: list[str]) -> int:
    # independent oracle: enumerate all subsequences of the shorter list
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    best = 0
    for mask in range(1 << len(short)):
        candidate = [short[i] for i in range(len(short)) if mask >> i & 1]
        if len(candidate) <= best:
            continue
        it = iter(long_)
        if all(tok in it for tok in candidate):
            best = len(candidate)
    return best


@settings(max_examples=300, deadline=None)
@given(
    hyp=st.lists(st.sampled_from("abcde"), max_size=12),
    ref=st.lists(st.sampled_from("abcde"), max_size=12),
)
def test_rouge_matches_brute_force_lcs(hyp, ref):
    if not hyp or not ref:
        assert rouge_l(hyp, ref) == 0.0
        return
    lcs = _brute_force_lcs(hyp, ref)
    precision = lcs / len(hyp)
    recall = lcs / len(ref)
    if precision == 0 or recall == 0:
        expected = 0.0
    else:
        expected = (1 + 1.44) * precision * recall / (recall + 1.44 * precision)
    assert rouge_l(hyp, ref) == pytest.approx(expected)


def test_label_accuracy_examples():
    assert label_accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert label_accuracy([0, 1], [1, 0]) == 0.0
    assert label_accuracy([0, 1, 2, 2], [0, 1, 2, 1]) == 0.75


def test_label_accuracy_validation():
    with pytest.raises(ValueError):
        label_accuracy([0], [0, 1])
    with pytest.raises(ValueError):
        label_accuracy([], [])


def test_label_accuracy_paired_permutation_equivariance():
    preds = [0, 1, 2, 0, 1, 2, 2, 1]
    golds = [0, 2, 2, 0, 1, 0, 2, 0]
    base = label_accuracy(preds, golds)
    for perm in itertools.islice(itertools.permutations(range(len(preds))), 50):
        assert label_accuracy([preds[i] for i in perm], [golds[i] for i in perm]) == base


def _ds(ids):
    return [{"id": i, "components": {"a": f"text {i}"}} for i in ids]


def test_common_subset_intersection():
    one, two = common_subset([_ds(["1", "2", "3"]), _ds(["2", "3", "4"])])
    assert [r["id"] for r in one] == ["2", "3"]
    assert [r["id"] for r in two] == ["2", "3"]


def test_common_subset_identical_datasets():
    one, two = common_subset([_ds(["a", "b"]), _ds(["b", "a"])])
    assert [r["id"] for r in one] == [r["id"] for r in two] == ["a", "b"]


def test_common_subset_disjoint_signals():
    with pytest.raises(EmptyIntersectionError):
        common_subset([_ds(["1"]), _ds(["2"])])


def test_common_subset_duplicate_ids_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        common_subset([_ds(["1", "1"]), _ds(["1"])])


def test_scored_corpus_validation():
    ScoredCorpus(metric_name="bleu", score=42.0, pairs=(("1", "h", "r"),))
    with pytest.raises(ValueError, match="outside"):
        ScoredCorpus(metric_name="rouge_l", score=1.5, pairs=())
    with pytest.raises(ValueError, match="unique"):
        ScoredCorpus(metric_name="bleu", score=1.0, pairs=(("1", "h", "r"), ("1", "h2", "r2")))
