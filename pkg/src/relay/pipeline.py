"""File-coupled pipeline stages: build, translate, split.

Each stage reads and writes JSONL so the expensive translation step can be
cached and the cheap stages re-run freely. The in-memory composition
(`run_pipeline`) is the same code path the CLI uses, minus the files.
"""

from __future__ import annotations

import datetime as _dt
import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .backends import TranslationRequest
from .config import MODE_CONCAT, MODE_SEPARATE, ConfigError, RunConfig, config_hash
from .reversibility import CellKey, ReversibilityReport
from .schema import DataPoint, TaskSchema, builtin_schema, load_schema
from .sequence import (
    BuildError,
    IndicatorToken,
    build_separate,
    build_sequence,
    catalyst_mode,
    load_cs_templates,
)
from .splitter import (
    VERDICT_REVERSIBLE,
    SplitOutcome,
    split_sequence,
)

TRANSLATE_BATCH = 64


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def write_jsonl(path, records: Iterable[dict]) -> int:
    n = 0
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            n += 1
    return n


def schema_for(cfg: RunConfig, records: Sequence[dict] = ()) -> TaskSchema:
    """Resolve the schema from config, falling back to the records' task tag."""
    if cfg.schema_path:
        return load_schema(cfg.schema_path)
    task = cfg.task
    if task is None:
        tasks = {r.get("task") for r in records if r.get("task")}
        if len(tasks) == 1:
            task = tasks.pop()
    if task is None:
        raise ConfigError("no schema: give --task for a built-in or --schema for a custom file")
    return builtin_schema(task)


def build_records(
    points: Sequence[DataPoint],
    schema: TaskSchema,
    cfg: RunConfig,
    errors: list[BuildError] | None = None,
) -> list[dict]:
    """Render data points into translation-unit records with inversion metadata.

    Per-point build failures (a component empty after sanitization) follow
    the ingestion flag: strict raises, lenient skips and appends to
    ``errors``. Schema-level problems always raise.
    """
    base = {
        "task": schema.task_name,
        "src_lang": cfg.src_lang,
        "tgt_lang": cfg.tgt_lang,
    }
    records = []
    if cfg.mode == MODE_SEPARATE:
        for dp in points:
            for name, text in build_separate(dp):
                records.append(
                    {
                        "id": dp.id,
                        "mode": MODE_SEPARATE,
                        "component": name,
                        "component_names": list(schema.component_names),
                        "text": text,
                        "label": dp.label,
                        **base,
                    }
                )
        return records
    if len(schema.component_names) < 2:
        raise BuildError(
            f"schema {schema.task_name!r} declares {len(schema.component_names)} component(s); "
            "concatenation needs at least 2 (use separate mode)"
        )
    it = IndicatorToken(cfg.it)
    templates = load_cs_templates(cfg.cs_templates_path) if cfg.cs_templates_path else None
    cs = catalyst_mode(cfg.cs, schema, templates)
    for dp in points:
        try:
            seq = build_sequence(dp, it, cs, schema, layout=cfg.layout)
        except BuildError as err:
            if cfg.strict:
                raise
            if errors is not None:
                errors.append(err)
            continue
        records.append(
            {
                "id": dp.id,
                "mode": MODE_CONCAT,
                "text": seq.text,
                "it": it.glyph,
                "cs": cs.mode,
                "n_components": seq.n_components,
                "component_names": list(seq.component_names),
                "label": dp.label,
                **base,
            }
        )
    return records


def _request_id(record: dict) -> str:
    if record["mode"] == MODE_SEPARATE:
        return f"{record['id']}::{record['component']}"
    return record["id"]


def translate_records(records: Sequence[dict], backend, workers: int = 1) -> tuple[list[dict], int]:
    """Translate every record's text; one output per input, order preserved.

    Returns the translated records and the count of per-item failures. Items
    that fail are recorded with a null translation, never fabricated.
    """
    batches: list[list[dict]] = []
    current: list[dict] = []
    pair = None
    for record in records:
        record_pair = (record["src_lang"], record["tgt_lang"])
        if current and (record_pair != pair or len(current) >= TRANSLATE_BATCH):
            batches.append(current)
            current = []
        pair = record_pair
        current.append(record)
    if current:
        batches.append(current)

    def run(batch: list[dict]) -> list[tuple[str, str | None]]:
        req = TranslationRequest(
            items=tuple((_request_id(r), r["text"]) for r in batch),
            src_lang=batch[0]["src_lang"],
            tgt_lang=batch[0]["tgt_lang"],
        )
        return backend.translate_batch(req)

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]

    out = []
    failed = 0
    for batch, result in zip(batches, results):
        for record, (rid, text) in zip(batch, result):
            if rid != _request_id(record):
                raise RuntimeError(f"backend reordered items: {rid!r} != {_request_id(record)!r}")
            translated = dict(record)
            translated["translation"] = text
            translated["backend"] = backend.name
            if text is None:
                failed += 1
            out.append(translated)
    return out, failed


@dataclass
class SplitStage:
    dataset: list[dict] = field(default_factory=list)
    rejected: list[dict] = field(default_factory=list)
    failed: list[dict] = field(default_factory=list)
    report: ReversibilityReport = field(default_factory=ReversibilityReport)


def _meta(record: dict, verdict: str, reason: str | None) -> dict:
    return {
        "verdict": verdict,
        "failure_reason": reason,
        "it": record.get("it"),
        "cs": record.get("cs"),
        "backend": record.get("backend"),
        "tgt_lang": record.get("tgt_lang"),
    }


def _cell_key(record: dict) -> CellKey:
    return CellKey(
        it=record.get("it") or "",
        cs=record.get("cs") or MODE_SEPARATE,
        tgt_lang=record.get("tgt_lang") or "",
        backend=record.get("backend") or "",
    )


def split_records(records: Sequence[dict], schema: TaskSchema) -> SplitStage:
    """Invert translated records into a dataset, a rejected sidecar, and a report."""
    stage = SplitStage()
    concat = [r for r in records if r["mode"] == MODE_CONCAT]
    separate = [r for r in records if r["mode"] == MODE_SEPARATE]

    for record in concat:
        translation = record.get("translation")
        if translation is None:
            stage.failed.append({"id": record["id"], "error": record.get("error"), "meta": _meta(record, "failed", None)})
            continue
        outcome = split_sequence(
            translation,
            IndicatorToken(record["it"]),
            record["n_components"],
            source_id=record["id"],
            component_names=record["component_names"],
        )
        stage.report.accumulate(outcome, _cell_key(record))
        if outcome.reversible:
            stage.dataset.append(
                {
                    "id": record["id"],
                    "components": {name: text for (_, text), name in zip(outcome.components, schema.component_names)},
                    "label": record.get("label"),
                    "meta": _meta(record, outcome.verdict, None),
                }
            )
        else:
            stage.rejected.append(
                {
                    "id": record["id"],
                    "translation": translation,
                    "label": record.get("label"),
                    "meta": _meta(record, outcome.verdict, outcome.failure_reason),
                }
            )

    if separate:
        groups: dict[str, dict] = {}
        order: list[str] = []
        for record in separate:
            if record["id"] not in groups:
                groups[record["id"]] = {}
                order.append(record["id"])
            groups[record["id"]][record["component"]] = record
        for rid in order:
            group = groups[rid]
            sample = next(iter(group.values()))
            missing = [n for n in schema.component_names if n not in group]
            if missing:
                raise ConfigError(f"record {rid!r} lacks translated component {missing[0]!r}")
            if any(group[n].get("translation") is None for n in schema.component_names):
                stage.failed.append({"id": rid, "error": "component translation failed", "meta": _meta(sample, "failed", None)})
                continue
            outcome = SplitOutcome(
                source_id=rid,
                verdict=VERDICT_REVERSIBLE,
                components=tuple((n, group[n]["translation"]) for n in schema.component_names),
            )
            stage.report.accumulate(outcome, _cell_key(sample))
            stage.dataset.append(
                {
                    "id": rid,
                    "components": {n: group[n]["translation"] for n in schema.component_names},
                    "label": sample.get("label"),
                    "meta": _meta(sample, VERDICT_REVERSIBLE, None),
                }
            )
    return stage


@dataclass
class PipelineResult:
    sequences: list[dict]
    translated: list[dict]
    stage: SplitStage

    @property
    def dataset(self) -> list[dict]:
        return self.stage.dataset

    @property
    def report(self) -> ReversibilityReport:
        return self.stage.report


def run_pipeline(points: Sequence[DataPoint], schema: TaskSchema, cfg: RunConfig, backend) -> PipelineResult:
    """Build, translate, and split in memory."""
    sequences = build_records(points, schema, cfg)
    translated, _ = translate_records(sequences, backend, workers=cfg.workers)
    return PipelineResult(sequences=sequences, translated=translated, stage=split_records(translated, schema))


def write_manifest(out_dir, cfg: RunConfig, command: str, counts: dict, outputs: list[str]) -> Path:
    """Record everything needed to reproduce this run with local backends."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "package_version": __version__,
        "python_version": platform.python_version(),
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "counts": counts,
        "outputs": outputs,
    }
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return path
