"""Run configuration: file loading, flag overrides, and hashing.

Config files are TOML or JSON (by extension); command-line flags override
file values. The resolved configuration is hashed into every manifest so a
run can be reproduced byte-for-byte with local backends.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backends import BackendSettings, HttpBackendConfig, NoiseProfile
from .sequence import CS_MODES, CS_NONE, LAYOUT_FLAT, LAYOUT_LINES, BuildError, IndicatorToken

MODE_SEPARATE = "separate"
MODE_CONCAT = "concat"
MODES = (MODE_SEPARATE, MODE_CONCAT)

BACKEND_KINDS = ("identity", "noisy", "http")


class ConfigError(Exception):
    """The configuration is unusable; a usage error, not a data error."""


def load_config_file(path) -> dict:
    p = Path(path)
    raw = p.read_bytes()
    try:
        if p.suffix.lower() == ".json":
            return json.loads(raw.decode("utf-8"))
        return tomllib.loads(raw.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


@dataclass
class RunConfig:
    task: str | None = None
    schema_path: str | None = None
    it: str | None = None
    cs: str = CS_NONE
    mode: str = MODE_CONCAT
    src_lang: str = "en"
    tgt_lang: str | None = None
    seed: int | None = None
    strict: bool = True
    layout: str = LAYOUT_FLAT
    workers: int = 4
    cs_templates_path: str | None = None
    backend: BackendSettings = field(default_factory=lambda: BackendSettings(kind="identity"))
    input_path: str | None = None
    output_dir: str | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Stable dict view for hashing and the manifest."""
        backend: dict = {"kind": self.backend.kind}
        if self.backend.label:
            backend["label"] = self.backend.label
        if self.backend.noise is not None:
            noise = self.backend.noise
            backend["noise"] = {
                "it_drop_prob": noise.it_drop_prob,
                "it_merge_prob": noise.it_merge_prob,
                "punct_sub_prob": noise.punct_sub_prob,
                "conjunctions": list(noise.conjunction_lexicon),
                "seed": noise.seed,
            }
        if self.backend.http is not None:
            http = self.backend.http
            backend["http"] = {
                "url": http.url,
                "auth_header": http.auth_header,
                "max_batch_size": http.max_batch_size,
                "max_in_flight": http.max_in_flight,
                "retries": http.retries,
                "timeout": http.timeout,
            }
        return {
            "task": self.task,
            "schema": self.schema_path,
            "it": self.it,
            "cs": self.cs,
            "mode": self.mode,
            "src": self.src_lang,
            "tgt": self.tgt_lang,
            "seed": self.seed,
            "strict": self.strict,
            "layout": self.layout,
            "workers": self.workers,
            "cs_templates": self.cs_templates_path,
            "backend": backend,
            "in": self.input_path,
            "out": self.output_dir,
        }


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _backend_settings(section: dict, top_seed: int | None) -> BackendSettings:
    kind = section.get("kind", "identity")
    if kind not in BACKEND_KINDS:
        raise ConfigError(f"backend.kind must be one of {BACKEND_KINDS}, got {kind!r}")
    label = section.get("label")
    noise = None
    http = None
    if kind == "noisy":
        noise_cfg = section.get("noise", {})
        seed = noise_cfg.get("seed", top_seed)
        if seed is None:
            raise ConfigError("the noisy backend needs a seed (--seed or backend.noise.seed)")
        try:
            noise = NoiseProfile(
                seed=int(seed),
                it_drop_prob=float(noise_cfg.get("it_drop_prob", 0.0)),
                it_merge_prob=float(noise_cfg.get("it_merge_prob", 0.0)),
                punct_sub_prob=float(noise_cfg.get("punct_sub_prob", 0.0)),
                conjunction_lexicon=tuple(noise_cfg.get("conjunctions", ("and", "then", "so"))),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif kind == "http":
        http_cfg = section.get("http", {})
        url = http_cfg.get("url")
        if not url:
            raise ConfigError("the http backend needs backend.http.url")
        try:
            http = HttpBackendConfig(
                url=url,
                auth_header=http_cfg.get("auth_header", "Authorization"),
                max_batch_size=int(http_cfg.get("max_batch_size", 32)),
                max_in_flight=int(http_cfg.get("max_in_flight", 4)),
                retries=int(http_cfg.get("retries", 3)),
                timeout=float(http_cfg.get("timeout", 120.0)),
                label=label or "http",
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return BackendSettings(kind=kind, noise=noise, http=http, label=label)


def resolve_config(file_cfg: dict | None = None, *, for_build: bool = True, **overrides) -> RunConfig:
    """Merge a config-file dict with flag overrides into a validated RunConfig.

    Overrides with value None are treated as absent. ``for_build=False``
    skips the sequence-construction checks (token presence, CS/mode
    interplay) that only the build stage needs.
    """
    merged = dict(file_cfg or {})
    backend_section = dict(merged.get("backend", {}))
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "backend":
            backend_section["kind"] = value
        else:
            merged[key] = value

    cfg = RunConfig()
    cfg.task = merged.get("task")
    cfg.schema_path = merged.get("schema")
    cfg.it = merged.get("it")
    cfg.cs = merged.get("cs", CS_NONE)
    cfg.mode = merged.get("mode", MODE_CONCAT)
    cfg.src_lang = merged.get("src", "en")
    cfg.tgt_lang = merged.get("tgt")
    cfg.seed = int(merged["seed"]) if merged.get("seed") is not None else None
    cfg.strict = bool(merged.get("strict", True))
    cfg.layout = merged.get("layout", LAYOUT_FLAT)
    cfg.workers = int(merged.get("workers", 4))
    cfg.cs_templates_path = merged.get("cs_templates")
    cfg.input_path = merged.get("in")
    cfg.output_dir = merged.get("out")

    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.cs not in CS_MODES:
        raise ConfigError(f"cs must be one of {CS_MODES}, got {cfg.cs!r}")
    if cfg.layout not in (LAYOUT_FLAT, LAYOUT_LINES):
        raise ConfigError(f"layout must be flat or lines, got {cfg.layout!r}")
    if for_build:
        if cfg.mode == MODE_CONCAT and not cfg.it:
            raise ConfigError("concat mode needs an indicator token (--it)")
        if cfg.mode == MODE_SEPARATE and cfg.cs != CS_NONE:
            cfg.warnings.append(f"cs={cfg.cs!r} is ignored in separate mode")
            cfg.cs = CS_NONE
    if cfg.it is not None:
        try:
            IndicatorToken(cfg.it)
        except BuildError as exc:
            raise ConfigError(str(exc)) from None
    cfg.backend = _backend_settings(backend_section, cfg.seed)
    return cfg
