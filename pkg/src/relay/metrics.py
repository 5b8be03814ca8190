"""Corpus BLEU, ROUGE-L, label accuracy, and common-subset extraction.

The conventions are fixed so scores are reproducible bit-for-bit:

* BLEU uses the WMT "13a" tokenization rules (see ``tokenize_13a``),
  modified n-gram precisions for n = 1..4 with clipping, their geometric
  mean, and the brevity penalty exp(1 - ref_len/hyp_len) when the
  hypothesis is shorter. No smoothing: a zero precision at any order makes
  the corpus score 0. Case-sensitive. Range [0, 100].
* ROUGE-L is the LCS F-score with beta = 1.2; the text helper lowercases
  and splits on whitespace. Range [0, 1].
* Label accuracy is the exact-match fraction. Range [0, 1].
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

NGRAM_ORDER = 4

ROUGE_BETA = 1.2

METRIC_RANGES = {
    "bleu": (0.0, 100.0),
    "rouge_l": (0.0, 1.0),
    "accuracy": (0.0, 1.0),
}


class EmptyIntersectionError(Exception):
    """The datasets share no ids, so there is no common subset to compare on."""


# 13a rules: unescape the four SGML entities, then split out (a) the ASCII
# punctuation/symbol ranges {-~ [-` space-& (-+ :-@ and /, (b) periods and
# commas not adjacent to digits on the relevant side, (c) dashes preceded by
# a digit. Whitespace then collapses to single spaces.
_PUNCT_SPLIT = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
_PERIOD_COMMA_AFTER = re.compile(r"([^0-9])([\.,])")
_PERIOD_COMMA_BEFORE = re.compile(r"([\.,])([^0-9])")
_DIGIT_DASH = re.compile(r"([0-9])(-)")
_WS = re.compile(r"\s+")


def tokenize_13a(line: str) -> list[str]:
    """Tokenize one segment with the 13a rules; returns the token list."""
    norm = line.replace("<skipped>", "")
    norm = norm.replace("-\n", "").replace("\n", " ")
    norm = norm.replace("&quot;", '"').replace("&amp;", "&")
    norm = norm.replace("&lt;", "<").replace("&gt;", ">")
    norm = f" {norm} "
    norm = _PUNCT_SPLIT.sub(r" \1 ", norm)
    norm = _PERIOD_COMMA_AFTER.sub(r"\1 \2 ", norm)
    norm = _PERIOD_COMMA_BEFORE.sub(r" \1 \2", norm)
    norm = _DIGIT_DASH.sub(r"\1 \2 ", norm)
    return _WS.sub(" ", norm).strip().split()


def _ngram_counts(tokens: list[str], max_order: int = NGRAM_ORDER) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i : i + n])] += 1
    return counts


@dataclass(frozen=True)
class BleuBreakdown:
    """Corpus BLEU with its sufficient statistics."""

    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    correct: tuple[int, ...]
    total: tuple[int, ...]


def corpus_bleu_breakdown(hypotheses: Sequence[str], references: Sequence[str]) -> BleuBreakdown:
    """Corpus-level BLEU against one reference per hypothesis, with details."""
    if len(hypotheses) != len(references):
        raise ValueError(
            f"hypotheses and references differ in length ({len(hypotheses)} vs {len(references)})"
        )
    if not hypotheses:
        raise ValueError("cannot score an empty corpus")
    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = tokenize_13a(hyp)
        ref_tokens = tokenize_13a(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        ref_counts = _ngram_counts(ref_tokens)
        for ngram, count in _ngram_counts(hyp_tokens).items():
            n = len(ngram)
            total[n - 1] += count
            correct[n - 1] += min(count, ref_counts.get(ngram, 0))
    precisions = tuple(c / t if t else 0.0 for c, t in zip(correct, total))
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1 - ref_len / hyp_len)
    else:
        bp = 1.0
    if any(p == 0.0 for p in precisions) or bp == 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / NGRAM_ORDER)
    return BleuBreakdown(
        score=score,
        precisions=precisions,
        brevity_penalty=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
        correct=tuple(correct),
        total=tuple(total),
    )


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """Corpus-level BLEU score in [0, 100]."""
    return corpus_bleu_breakdown(hypotheses, references).score


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # single-row DP; quadratic time, linear space
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis: Sequence[str], reference: Sequence[str], beta: float = ROUGE_BETA) -> float:
    """LCS-based F-score over token lists. Empty input scores 0."""
    if not hypothesis or not reference:
        return 0.0
    lcs = _lcs_length(list(hypothesis), list(reference))
    precision = lcs / len(hypothesis)
    recall = lcs / len(reference)
    if precision == 0.0 or recall == 0.0:
        return 0.0
    return ((1 + beta**2) * precision * recall) / (recall + beta**2 * precision)


def rouge_l_text(hypothesis: str, reference: str, beta: float = ROUGE_BETA) -> float:
    """ROUGE-L on raw strings: lowercase, then split on whitespace."""
    return rouge_l(hypothesis.lower().split(), reference.lower().split(), beta=beta)


def label_accuracy(predictions: Sequence, golds: Sequence) -> float:
    """Exact-match fraction over paired labels."""
    if len(predictions) != len(golds):
        raise ValueError(
            f"predictions and golds differ in length ({len(predictions)} vs {len(golds)})"
        )
    if not predictions:
        raise ValueError("cannot score an empty label set")
    return sum(p == g for p, g in zip(predictions, golds)) / len(predictions)


def _record_id(record) -> str:
    if isinstance(record, dict):
        return record["id"]
    return record.id


def common_subset(datasets: Sequence[Sequence]) -> list[list]:
    """Restrict each dataset to the ids present in all of them.

    Returns one filtered list per input dataset, each in the same canonical
    order (sorted by id), so position i refers to the same instance across
    datasets.
    """
    if len(datasets) < 2:
        raise ValueError("need at least two datasets to intersect")
    by_id: list[dict] = []
    for ds in datasets:
        index = {}
        for record in ds:
            rid = _record_id(record)
            if rid in index:
                raise ValueError(f"duplicate id {rid!r} within one dataset")
            index[rid] = record
        by_id.append(index)
    shared = set(by_id[0])
    for index in by_id[1:]:
        shared &= set(index)
    if not shared:
        raise EmptyIntersectionError("the datasets share no ids")
    order = sorted(shared)
    return [[index[rid] for rid in order] for index in by_id]


@dataclass(frozen=True)
class ScoredCorpus:
    """An evaluated corpus: the scored pairs plus the metric value."""

    metric_name: str
    score: float
    pairs: tuple[tuple[str, str, str], ...]

    def __post_init__(self):
        ids = [rid for rid, _, _ in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("pair ids must be unique")
        lo, hi = METRIC_RANGES.get(self.metric_name, (-math.inf, math.inf))
        if not lo <= self.score <= hi:
            raise ValueError(f"{self.metric_name} score {self.score} outside [{lo}, {hi}]")

    def to_json_dict(self, config: dict | None = None) -> dict:
        return {
            "metric": self.metric_name,
            "score": self.score,
            "n": len(self.pairs),
            "config": config or {},
        }
