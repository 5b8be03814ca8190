"""LLM-as-judge evaluation: 0-5 quality scoring and pairwise comparison.

Scoring sends one prompt per data point and parses the first in-range
number out of the reply; replies with no parsable score are kept for audit
but never counted in the histogram. Pairwise comparison presents the two
variants in a seeded random order per item to cancel positional bias, then
maps the verdict back through the presentation order.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Sequence

import requests

from .backends import AUTH_ENV, TRANSIENT_STATUS

logger = logging.getLogger(__name__)

SEPARATE_TAG = "separate"
ITCS_TAG = "it_cs"
TIE = "tie"

VERDICT_FIRST = "first"
VERDICT_SECOND = "second"

BUCKET_LABELS = ("[0,1)", "[1,2)", "[2,3)", "[3,4)", "[4,5]")

DATAPOINT_SLOT = "{datapoint}"
FIRST_SLOT = "{first}"
SECOND_SLOT = "{second}"

_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")
_VERDICT_WORD = re.compile(r"\b(first|second|tie)\b", re.IGNORECASE)


class JudgeError(Exception):
    """The judge endpoint could not be used at all (config/template trouble)."""


@dataclass(frozen=True)
class JudgeEndpoint:
    """A generic chat-completion endpoint."""

    url: str
    model: str
    auth_header: str = "Authorization"
    temperature: float = 0.0
    timeout: float = 120.0
    retries: int = 2
    max_in_flight: int = 4


@dataclass(frozen=True)
class ScoreRecord:
    id: str
    raw_response: str
    score: float | None = None
    error: str | None = None

    @property
    def unparseable(self) -> bool:
        return self.score is None and self.error is None


@dataclass(frozen=True)
class PairwiseRecord:
    id: str
    presented_order: tuple[str, str]
    raw_response: str
    verdict: str | None = None
    canonical_verdict: str | None = None
    error: str | None = None

    @property
    def unparseable(self) -> bool:
        return self.verdict is None and self.error is None


def default_template(name: str) -> str:
    """Read a bundled prompt template (``score`` or ``pairwise``)."""
    return (resources.files("relay") / "templates" / f"{name}_prompt.txt").read_text("utf-8")


def parse_score(text: str) -> float | None:
    """First number in [0, 5] found in the reply, or None."""
    for match in _NUMBER.finditer(text):
        value = float(match.group())
        if 0.0 <= value <= 5.0:
            return value
    return None


def bucket_label(score: float) -> str:
    if not 0.0 <= score <= 5.0:
        raise ValueError(f"score {score} outside [0, 5]")
    return BUCKET_LABELS[min(int(score), len(BUCKET_LABELS) - 1)]


def score_histogram(records: Sequence[ScoreRecord]) -> dict[str, int]:
    hist = {label: 0 for label in BUCKET_LABELS}
    for rec in records:
        if rec.score is not None:
            hist[bucket_label(rec.score)] += 1
    return hist


def parse_pairwise_verdict(text: str) -> str | None:
    match = _VERDICT_WORD.search(text)
    return match.group(1).lower() if match else None


def presentation_order(seed: int, pair_id: str) -> tuple[str, str]:
    """Fair coin from (seed, id): which variant the judge sees first."""
    digest = hashlib.blake2b(f"{seed}:{pair_id}".encode("utf-8"), digest_size=8).digest()
    if int.from_bytes(digest, "big") & 1:
        return (ITCS_TAG, SEPARATE_TAG)
    return (SEPARATE_TAG, ITCS_TAG)


def canonicalize(presented_order: tuple[str, str], verdict: str) -> str:
    """Map a positional verdict back to the system it refers to."""
    if verdict == TIE:
        return TIE
    if verdict == VERDICT_FIRST:
        return presented_order[0]
    if verdict == VERDICT_SECOND:
        return presented_order[1]
    raise ValueError(f"unknown verdict {verdict!r}")


def render_datapoint(record: dict) -> str:
    """Readable block for the {datapoint} slot: components then label."""
    lines = [f"{name}: {text}" for name, text in record.get("components", {}).items()]
    if record.get("label") is not None:
        lines.append(f"label: {record['label']}")
    return "\n".join(lines)


def _chat_once(endpoint: JudgeEndpoint, session: requests.Session, prompt: str) -> str:
    headers = {"Content-Type": "application/json"}
    auth = os.environ.get(AUTH_ENV)
    if auth:
        headers[endpoint.auth_header] = auth
    body = {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
    }
    last_error = ""
    for attempt in range(endpoint.retries + 1):
        if attempt:
            time.sleep(0.5 * (2 ** (attempt - 1)))
        try:
            resp = session.post(endpoint.url, json=body, headers=headers, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_error = f"transport failure: {exc}"
            continue
        if resp.status_code in TRANSIENT_STATUS:
            last_error = f"HTTP {resp.status_code}"
            continue
        if not 200 <= resp.status_code < 300:
            raise JudgeError(f"HTTP {resp.status_code} from {endpoint.url}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise JudgeError("endpoint reply is not a chat completion") from None
    raise JudgeError(f"giving up after {endpoint.retries + 1} attempts: {last_error}")


def _dispatch(endpoint: JudgeEndpoint, prompts: Sequence[str]) -> list[tuple[str, str | None]]:
    """Send all prompts with a bounded in-flight cap; returns (reply, error) per prompt."""
    session = requests.Session()

    def one(prompt: str) -> tuple[str, str | None]:
        try:
            return _chat_once(endpoint, session, prompt), None
        except JudgeError as exc:
            return "", str(exc)

    with ThreadPoolExecutor(max_workers=endpoint.max_in_flight) as pool:
        return list(pool.map(one, prompts))


def _sample(items: list, sample_size: int | None, seed: int) -> list:
    if sample_size is None or sample_size >= len(items):
        return items
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(items)), sample_size))
    return [items[i] for i in picked]


def score_dataset(
    endpoint: JudgeEndpoint,
    records: Sequence[dict],
    template: str,
    seed: int,
    sample_size: int | None = None,
    send: Callable[[JudgeEndpoint, Sequence[str]], list[tuple[str, str | None]]] = _dispatch,
) -> tuple[list[ScoreRecord], dict[str, int]]:
    """Score every data point on the 0-5 scale and bucket the results."""
    if DATAPOINT_SLOT not in template:
        raise JudgeError(f"scoring template has no {DATAPOINT_SLOT} slot")
    chosen = _sample(list(records), sample_size, seed)
    prompts = [template.replace(DATAPOINT_SLOT, render_datapoint(r)) for r in chosen]
    replies = send(endpoint, prompts)
    out = []
    for record, (reply, error) in zip(chosen, replies):
        if error is not None:
            out.append(ScoreRecord(id=record["id"], raw_response="", error=error))
        else:
            out.append(ScoreRecord(id=record["id"], raw_response=reply, score=parse_score(reply)))
    return out, score_histogram(out)


def pairwise_eval(
    endpoint: JudgeEndpoint,
    pairs: Sequence[tuple[dict, dict]],
    template: str,
    seed: int,
    sample_size: int | None = 200,
    send: Callable[[JudgeEndpoint, Sequence[str]], list[tuple[str, str | None]]] = _dispatch,
) -> tuple[list[PairwiseRecord], dict[str, int]]:
    """Compare (separate, it_cs) variants pairwise with randomized order.

    Each pair shares an id; presentation order is a fair coin from
    (seed, id) and the verdict is demapped through it, so the tallies are
    immune to the judge's positional bias by construction.
    """
    if FIRST_SLOT not in template or SECOND_SLOT not in template:
        raise JudgeError(f"pairwise template needs {FIRST_SLOT} and {SECOND_SLOT} slots")
    for separate_rec, itcs_rec in pairs:
        if separate_rec["id"] != itcs_rec["id"]:
            raise JudgeError(
                f"pair ids differ: {separate_rec['id']!r} vs {itcs_rec['id']!r}"
            )
    chosen = _sample(list(pairs), sample_size, seed)
    orders = [presentation_order(seed, sep["id"]) for sep, _ in chosen]
    prompts = []
    for (separate_rec, itcs_rec), order in zip(chosen, orders):
        shown = {SEPARATE_TAG: separate_rec, ITCS_TAG: itcs_rec}
        prompt = template.replace(FIRST_SLOT, render_datapoint(shown[order[0]]))
        prompt = prompt.replace(SECOND_SLOT, render_datapoint(shown[order[1]]))
        prompts.append(prompt)
    replies = send(endpoint, prompts)
    records = []
    tallies = {SEPARATE_TAG: 0, ITCS_TAG: 0, TIE: 0}
    for (separate_rec, _), order, (reply, error) in zip(chosen, orders, replies):
        rid = separate_rec["id"]
        if error is not None:
            records.append(PairwiseRecord(id=rid, presented_order=order, raw_response="", error=error))
            continue
        verdict = parse_pairwise_verdict(reply)
        if verdict is None:
            records.append(PairwiseRecord(id=rid, presented_order=order, raw_response=reply))
            continue
        canonical = canonicalize(order, verdict)
        tallies[canonical] += 1
        records.append(
            PairwiseRecord(
                id=rid,
                presented_order=order,
                raw_response=reply,
                verdict=verdict,
                canonical_verdict=canonical,
            )
        )
    return records, tallies
