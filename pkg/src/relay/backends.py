"""Translation backends: identity, a seeded degradation simulator, and HTTP.

All backends share one contract: one output per input item, same order,
request ids preserved. The noisy backend reproduces the two failure modes
that break reversibility in practice, boundary tokens getting dropped or
merged into conjunctions, with per-item deterministic randomness so results
do not depend on batch composition.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field

import requests

from .sequence import IndicatorToken

logger = logging.getLogger(__name__)

AUTH_ENV = "RELAY_HTTP_AUTH"

# status codes worth retrying before giving up on a chunk
TRANSIENT_STATUS = {408, 429, 500, 502, 503, 504}

DEFAULT_CONJUNCTIONS = ("and", "then", "so")


class BackendError(Exception):
    """A batch could not be translated."""

    def __init__(self, message: str, request_ids: tuple[str, ...] = ()):
        self.request_ids = request_ids
        if request_ids:
            message = f"{message} [request_ids: {', '.join(request_ids)}]"
        super().__init__(message)


class ProtocolError(BackendError):
    """The service broke the wire contract (e.g. wrong translation count)."""


@dataclass(frozen=True)
class TranslationRequest:
    """An ordered batch of (request_id, text) items for one language pair."""

    items: tuple[tuple[str, str], ...]
    src_lang: str
    tgt_lang: str

    def __post_init__(self):
        if not self.items:
            raise ValueError("translation request has no items")
        ids = [rid for rid, _ in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("request ids must be unique within a request")


@dataclass(frozen=True)
class NoiseProfile:
    """Independent per-event corruption probabilities for the simulator.

    Each token occurrence is deleted with ``it_drop_prob``, else replaced by
    a conjunction with ``it_merge_prob``; each sentence-final period becomes
    a conjunction with ``punct_sub_prob``. The survival probability of a
    sequence with n tokens is ((1-drop)*(1-merge))^n.
    """

    seed: int
    it_drop_prob: float = 0.0
    it_merge_prob: float = 0.0
    punct_sub_prob: float = 0.0
    conjunction_lexicon: tuple[str, ...] = DEFAULT_CONJUNCTIONS

    def __post_init__(self):
        for name in ("it_drop_prob", "it_merge_prob", "punct_sub_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if (self.it_merge_prob > 0 or self.punct_sub_prob > 0) and not self.conjunction_lexicon:
            raise ValueError("substitution enabled but the conjunction lexicon is empty")


def _stream_rng(seed: int, stream_key: str) -> random.Random:
    digest = hashlib.blake2b(f"{seed}:{stream_key}".encode("utf-8"), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _append_spaced(out: list[str], word: str, text: str, pos: int) -> None:
    # keep the substituted word flanked by single spaces
    if out and not out[-1][-1].isspace():
        out.append(" ")
    out.append(word)
    if pos + 1 < len(text) and not text[pos + 1].isspace():
        out.append(" ")


def apply_noise(text: str, it: IndicatorToken | None, profile: NoiseProfile, stream_key: str) -> str:
    """Corrupt one text deterministically from (seed, stream_key).

    Randomness is derived per item, not from a shared sequential RNG, so the
    result is independent of batch composition and safe under any worker
    interleaving.
    """
    rng = _stream_rng(profile.seed, stream_key)
    glyph = it.glyph if it is not None else None
    out: list[str] = []
    n = len(text)
    for i, ch in enumerate(text):
        if glyph is not None and ch == glyph:
            if rng.random() < profile.it_drop_prob:
                continue
            if rng.random() < profile.it_merge_prob:
                _append_spaced(out, rng.choice(profile.conjunction_lexicon), text, i)
                continue
            out.append(ch)
        elif ch == "." and (i + 1 == n or text[i + 1].isspace()):
            if rng.random() < profile.punct_sub_prob:
                _append_spaced(out, rng.choice(profile.conjunction_lexicon), text, i)
                continue
            out.append(ch)
        else:
            out.append(ch)
    return "".join(out)


class IdentityBackend:
    """Returns every text unchanged. The ground truth for round-trip tests."""

    name = "identity"

    def translate_batch(self, req: TranslationRequest) -> list[tuple[str, str | None]]:
        return [(rid, text) for rid, text in req.items]


class NoisyBackend:
    """Simulates an MT system that degrades boundaries, reproducibly."""

    def __init__(self, profile: NoiseProfile, it: IndicatorToken | None = None, name: str = "noisy"):
        self.profile = profile
        self.it = it
        self.name = name

    def translate_batch(self, req: TranslationRequest) -> list[tuple[str, str | None]]:
        return [(rid, apply_noise(text, self.it, self.profile, rid)) for rid, text in req.items]


@dataclass(frozen=True)
class HttpBackendConfig:
    """Connection settings for a generic JSON-over-HTTP MT service."""

    url: str
    auth_header: str = "Authorization"
    max_batch_size: int = 32
    max_in_flight: int = 4
    retries: int = 3
    timeout: float = 120.0
    backoff_base: float = 0.5
    label: str = "http"

    def __post_init__(self):
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


class HttpBackend:
    """Client for ``POST {url}/translate`` with chunking, retries, and an
    in-flight cap shared across all callers of this instance.

    Request body: ``{"src": str, "tgt": str, "texts": [str, ...]}``;
    response: ``{"translations": [str|null, ...]}`` with positional
    correspondence. A null entry marks that single item as failed without
    failing the batch.
    """

    def __init__(self, config: HttpBackendConfig, session: requests.Session | None = None):
        self.config = config
        self.name = config.label
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(config.max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        auth = os.environ.get(AUTH_ENV)
        if auth:
            headers[self.config.auth_header] = auth
        return headers

    def _post_chunk(self, chunk: list[tuple[str, str]], src: str, tgt: str) -> list[str | None]:
        cfg = self.config
        url = cfg.url.rstrip("/") + "/translate"
        body = {"src": src, "tgt": tgt, "texts": [text for _, text in chunk]}
        ids = tuple(rid for rid, _ in chunk)
        last_error: str = ""
        for attempt in range(cfg.retries + 1):
            if attempt:
                delay = cfg.backoff_base * (2 ** (attempt - 1))
                logger.debug("retrying chunk of %d after %.2fs (%s)", len(chunk), delay, last_error)
                time.sleep(delay)
            try:
                with self._gate:
                    resp = self._session.post(url, json=body, headers=self._headers(), timeout=cfg.timeout)
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                continue
            if resp.status_code in TRANSIENT_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if not 200 <= resp.status_code < 300:
                raise BackendError(f"HTTP {resp.status_code} from {url}", request_ids=ids)
            try:
                payload = resp.json()
                translations = payload["translations"]
            except (ValueError, KeyError, TypeError):
                raise ProtocolError("response is not a translations object", request_ids=ids) from None
            if not isinstance(translations, list) or len(translations) != len(chunk):
                got = len(translations) if isinstance(translations, list) else "non-list"
                raise ProtocolError(
                    f"expected {len(chunk)} translations, got {got}", request_ids=ids
                )
            for entry in translations:
                if entry is not None and not isinstance(entry, str):
                    raise ProtocolError("translations must be strings or null", request_ids=ids)
            return translations
        raise BackendError(f"giving up after {cfg.retries + 1} attempts: {last_error}", request_ids=ids)

    def translate_batch(self, req: TranslationRequest) -> list[tuple[str, str | None]]:
        cfg = self.config
        items = list(req.items)
        results: list[tuple[str, str | None]] = []
        for start in range(0, len(items), cfg.max_batch_size):
            chunk = items[start : start + cfg.max_batch_size]
            translations = self._post_chunk(chunk, req.src_lang, req.tgt_lang)
            results.extend((rid, text) for (rid, _), text in zip(chunk, translations))
        return results


@dataclass
class BackendSettings:
    """Parsed ``backend.*`` configuration."""

    kind: str
    noise: NoiseProfile | None = None
    http: HttpBackendConfig | None = None
    label: str | None = None
    extras: dict = field(default_factory=dict)


def make_backend(settings: BackendSettings, it: IndicatorToken | None = None):
    """Instantiate a backend from parsed settings."""
    if settings.kind == "identity":
        return IdentityBackend()
    if settings.kind == "noisy":
        if settings.noise is None:
            raise ValueError("noisy backend requires a noise profile")
        return NoisyBackend(settings.noise, it=it, name=settings.label or "noisy")
    if settings.kind == "http":
        if settings.http is None:
            raise ValueError("http backend requires connection settings")
        cfg = settings.http
        if settings.label:
            cfg = HttpBackendConfig(**{**cfg.__dict__, "label": settings.label})
        return HttpBackend(cfg)
    raise ValueError(f"unknown backend kind {settings.kind!r}")
