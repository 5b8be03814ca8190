"""Command-line orchestration of the pipeline and its sub-stages.

Stages are file-coupled (each reads and writes JSONL) so the expensive
translation step can be cached while build, split, and reporting stay
cheap to re-run. Exit codes: 0 success (rejections are data, not failure),
1 usage or config error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .backends import BackendError, make_backend
from .config import (
    MODES,
    ConfigError,
    RunConfig,
    config_hash,
    load_config_file,
    resolve_config,
)
from .figures import save_heatmap, save_pairwise_tallies, save_score_histogram
from .llm_eval import (
    ITCS_TAG,
    SEPARATE_TAG,
    JudgeEndpoint,
    JudgeError,
    default_template,
    pairwise_eval,
    score_dataset,
)
from .metrics import (
    EmptyIntersectionError,
    ScoredCorpus,
    common_subset,
    corpus_bleu_breakdown,
    label_accuracy,
    rouge_l_text,
)
from .pipeline import (
    build_records,
    read_jsonl,
    schema_for,
    split_records,
    translate_records,
    write_jsonl,
    write_manifest,
)
from .reversibility import MissingCellError, ReversibilityReport
from .schema import DatasetError, parse_dataset
from .sequence import CS_MODES, LAYOUT_FLAT, LAYOUT_LINES, BuildError, IndicatorToken
from .splitter import OutcomeMismatchError


@click.group()
def main():
    """Translate multi-component datasets as single sequences and audit the result."""


def _resolve(config_path, for_build: bool = True, **flags) -> RunConfig:
    file_cfg = load_config_file(config_path) if config_path else None
    cfg = resolve_config(file_cfg, for_build=for_build, **flags)
    for warning in cfg.warnings:
        click.echo(f"warning: {warning}", err=True)
    return cfg


def _ingest(cfg: RunConfig, schema):
    errors: list[DatasetError] = []
    with open(cfg.input_path, "rb") as fh:
        points = parse_dataset(fh, schema, strict=cfg.strict, errors=errors)
    if errors:
        click.echo(f"warning: skipped {len(errors)} bad record(s)", err=True)
    if not points:
        click.echo("warning: input dataset is empty", err=True)
    return points, len(errors)


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": config_hash(cfg), "dataset": cfg.input_path}


def _write_report(stage, cfg: RunConfig, out: Path) -> None:
    write_jsonl(out / "dataset.jsonl", stage.dataset)
    write_jsonl(out / "dataset.rejected.jsonl", stage.rejected)
    if stage.failed:
        write_jsonl(out / "dataset.failed.jsonl", stage.failed)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(stage.report.to_json_dict(_provenance(cfg)), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def _echo_split_summary(stage) -> None:
    total = stage.report.total()
    reversible = stage.report.reversible()
    rate = reversible / total if total else 0.0
    click.echo(
        f"split: {reversible}/{total} reversible (rate {rate:.4f}), "
        f"{len(stage.rejected)} rejected, {len(stage.failed)} failed"
    )


# shared option declarations

_opt_config = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
_opt_task = click.option("--task", help="built-in task: nli, wpr, or qg")
_opt_schema = click.option("--schema", "schema", type=click.Path(exists=True, dir_okay=False), help="custom schema JSON")
_opt_in = click.option("--in", "input_path", type=click.Path(exists=True, dir_okay=False))
_opt_out = click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
_opt_strict = click.option("--strict/--lenient", "strict", default=None, help="abort on bad records (default) or skip and count")
_opt_seed = click.option("--seed", type=int)
_opt_backend = click.option("--backend", "backend", type=click.Choice(["identity", "noisy", "http"]))
_opt_workers = click.option("--workers", type=int)
_opt_figures = click.option("--figures/--no-figures", "figures", default=True, help="also render matplotlib figures")


@main.command()
@_opt_config
@_opt_task
@_opt_schema
@click.option("--it", help="indicator token glyph, e.g. '#'")
@click.option("--cs", type=click.Choice(CS_MODES))
@click.option("--mode", type=click.Choice(MODES))
@click.option("--src", help="source language code (default en)")
@click.option("--tgt", help="target language code")
@click.option("--layout", type=click.Choice([LAYOUT_FLAT, LAYOUT_LINES]))
@click.option("--cs-templates", "cs_templates", type=click.Path(exists=True, dir_okay=False))
@_opt_strict
@_opt_in
@_opt_out
def build(config_path, task, schema, it, cs, mode, src, tgt, layout, cs_templates, strict, input_path, output_dir):
    """Render the dataset into translation sequences (or separate units)."""
    cfg = _resolve(
        config_path,
        task=task, schema=schema, it=it, cs=cs, mode=mode, src=src, tgt=tgt,
        layout=layout, cs_templates=cs_templates, strict=strict,
        **{"in": input_path, "out": output_dir},
    )
    if not cfg.input_path:
        raise ConfigError("build needs an input dataset (--in)")
    out = Path(cfg.output_dir)
    task_schema = schema_for(cfg)
    points, skipped = _ingest(cfg, task_schema)
    build_errors: list[BuildError] = []
    records = build_records(points, task_schema, cfg, errors=build_errors)
    if build_errors:
        click.echo(f"warning: skipped {len(build_errors)} unbuildable point(s)", err=True)
    n = write_jsonl(out / "sequences.jsonl", records)
    write_manifest(
        out, cfg, "build",
        {"points": len(points), "sequences": n, "skipped": skipped + len(build_errors)},
        ["sequences.jsonl"],
    )
    click.echo(f"build: {n} sequence record(s) -> {out / 'sequences.jsonl'}")


@main.command()
@_opt_config
@_opt_backend
@_opt_seed
@_opt_workers
@click.option("--it", help="indicator token (needed by the noisy backend; inferred from records if absent)")
@_opt_in
@_opt_out
def translate(config_path, backend, seed, workers, it, input_path, output_dir):
    """Translate built sequence records through the configured backend."""
    cfg = _resolve(
        config_path, for_build=False,
        backend=backend, seed=seed, workers=workers, it=it,
        **{"in": input_path, "out": output_dir},
    )
    if not cfg.input_path:
        raise ConfigError("translate needs built sequence records (--in)")
    records = read_jsonl(cfg.input_path)
    glyphs = {r["it"] for r in records if r.get("it")}
    glyph = cfg.it or (glyphs.pop() if len(glyphs) == 1 else None)
    engine = make_backend(cfg.backend, it=IndicatorToken(glyph) if glyph else None)
    translated, failed = translate_records(records, engine, workers=cfg.workers)
    out = Path(cfg.output_dir)
    n = write_jsonl(out / "translated.jsonl", translated)
    write_manifest(out, cfg, "translate", {"records": n, "failed_items": failed}, ["translated.jsonl"])
    click.echo(f"translate: {n} record(s), {failed} failed item(s) -> {out / 'translated.jsonl'}")


@main.command()
@_opt_config
@_opt_task
@_opt_schema
@_opt_in
@_opt_out
def split(config_path, task, schema, input_path, output_dir):
    """Resegment translated records into a dataset, sidecar, and report."""
    cfg = _resolve(config_path, for_build=False, task=task, schema=schema, **{"in": input_path, "out": output_dir})
    if not cfg.input_path:
        raise ConfigError("split needs translated records (--in)")
    records = read_jsonl(cfg.input_path)
    task_schema = schema_for(cfg, records)
    stage = split_records(records, task_schema)
    out = Path(cfg.output_dir)
    _write_report(stage, cfg, out)
    write_manifest(
        out, cfg, "split",
        {"dataset": len(stage.dataset), "rejected": len(stage.rejected), "failed": len(stage.failed)},
        ["dataset.jsonl", "dataset.rejected.jsonl", "report.json"],
    )
    _echo_split_summary(stage)


@main.command()
@_opt_config
@_opt_task
@_opt_schema
@click.option("--it")
@click.option("--cs", type=click.Choice(CS_MODES))
@click.option("--mode", type=click.Choice(MODES))
@click.option("--src")
@click.option("--tgt")
@click.option("--layout", type=click.Choice([LAYOUT_FLAT, LAYOUT_LINES]))
@click.option("--cs-templates", "cs_templates", type=click.Path(exists=True, dir_okay=False))
@_opt_backend
@_opt_seed
@_opt_workers
@_opt_strict
@_opt_in
@_opt_out
def pipeline(config_path, task, schema, it, cs, mode, src, tgt, layout, cs_templates,
             backend, seed, workers, strict, input_path, output_dir):
    """Run build, translate, and split end to end."""
    cfg = _resolve(
        config_path,
        task=task, schema=schema, it=it, cs=cs, mode=mode, src=src, tgt=tgt,
        layout=layout, cs_templates=cs_templates, backend=backend, seed=seed,
        workers=workers, strict=strict, **{"in": input_path, "out": output_dir},
    )
    if not cfg.input_path:
        raise ConfigError("pipeline needs an input dataset (--in)")
    out = Path(cfg.output_dir)
    task_schema = schema_for(cfg)
    points, skipped = _ingest(cfg, task_schema)
    build_errors: list[BuildError] = []
    sequences = build_records(points, task_schema, cfg, errors=build_errors)
    if build_errors:
        click.echo(f"warning: skipped {len(build_errors)} unbuildable point(s)", err=True)
    skipped += len(build_errors)
    write_jsonl(out / "sequences.jsonl", sequences)
    glyph = cfg.it
    engine = make_backend(cfg.backend, it=IndicatorToken(glyph) if glyph else None)
    translated, failed = translate_records(sequences, engine, workers=cfg.workers)
    write_jsonl(out / "translated.jsonl", translated)
    stage = split_records(translated, task_schema)
    _write_report(stage, cfg, out)
    write_manifest(
        out, cfg, "pipeline",
        {
            "points": len(points), "skipped": skipped, "sequences": len(sequences),
            "failed_items": failed, "dataset": len(stage.dataset),
            "rejected": len(stage.rejected), "failed_points": len(stage.failed),
        },
        ["sequences.jsonl", "translated.jsonl", "dataset.jsonl", "dataset.rejected.jsonl", "report.json"],
    )
    _echo_split_summary(stage)


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--langs", help="comma-separated target languages (default: all present)")
@click.option("--backend", "backend", help="backend id to plot when several are present")
@_opt_figures
@_opt_out
def report(reports, langs, backend, figures, output_dir):
    """Merge reversibility reports and emit the token-by-CS matrix."""
    merged = ReversibilityReport()
    for path in reports:
        with open(path, "r", encoding="utf-8") as fh:
            merged.merge(ReversibilityReport.from_json_dict(json.load(fh)))
    lang_list = [s.strip() for s in langs.split(",") if s.strip()] if langs else sorted(
        {k.tgt_lang for k in merged.cells}
    )
    matrix = merged.matrix_view(lang_list, backend=backend)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(merged.to_json_dict({"merged_from": list(reports)}), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    (out / "matrix.csv").write_text(matrix.to_csv(), encoding="utf-8")
    outputs = "report.json, matrix.csv"
    if figures:
        save_heatmap(matrix, out / "heatmap.png")
        outputs += ", heatmap.png"
    click.echo(f"report: {len(merged.cells)} cell(s), langs {','.join(lang_list)} -> {out} ({outputs})")


def _eval_lines(path: str, component: str | None) -> tuple[list[str], list]:
    """Line-aligned eval input: plain text lines, or a component/label per JSONL record."""
    if path.endswith(".jsonl"):
        records = read_jsonl(path)
        ids = [r["id"] for r in records]
        if component:
            return ids, [r["components"][component] for r in records]
        return ids, [r.get("label") for r in records]
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    return [str(i + 1) for i in range(len(lines))], lines


@main.command(name="eval")
@click.argument("datasets", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", required=True, type=click.Choice(["bleu", "rouge-l", "accuracy", "common-subset"]))
@click.option("--hyp", type=click.Path(exists=True, dir_okay=False), help="hypotheses: text lines or dataset JSONL")
@click.option("--ref", type=click.Path(exists=True, dir_okay=False), help="references: text lines or dataset JSONL")
@click.option("--component", help="component to extract from dataset JSONL inputs")
@_opt_out
def eval_cmd(datasets, metric, hyp, ref, component, output_dir):
    """Score translation quality or extract the common reversible subset."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if metric == "common-subset":
        if len(datasets) < 2:
            raise click.UsageError("common-subset needs at least two dataset arguments")
        subsets = common_subset([read_jsonl(p) for p in datasets])
        for i, subset in enumerate(subsets):
            write_jsonl(out / f"common.{i}.jsonl", subset)
        click.echo(f"common-subset: {len(subsets[0])} shared record(s) across {len(datasets)} dataset(s) -> {out}")
        return
    if not hyp or not ref:
        raise click.UsageError(f"--metric {metric} needs --hyp and --ref")
    ids, hyps = _eval_lines(hyp, component)
    _, refs = _eval_lines(ref, component)
    if len(hyps) != len(refs):
        raise DatasetError(f"hyp and ref lengths differ ({len(hyps)} vs {len(refs)})")
    if not hyps:
        raise DatasetError("cannot score an empty corpus")
    config = {"hyp": hyp, "ref": ref, "component": component}
    if metric == "bleu":
        breakdown = corpus_bleu_breakdown(hyps, refs)
        score = breakdown.score
        config.update(
            tokenizer="13a", smoothing="none",
            precisions=[round(p, 6) for p in breakdown.precisions],
            brevity_penalty=round(breakdown.brevity_penalty, 6),
            hyp_len=breakdown.hyp_len, ref_len=breakdown.ref_len,
        )
        name = "bleu"
    elif metric == "rouge-l":
        score = sum(rouge_l_text(h, r) for h, r in zip(hyps, refs)) / len(hyps)
        config.update(beta=1.2, aggregation="mean over pairs", lowercase=True)
        name = "rouge_l"
    else:
        score = label_accuracy([str(h) for h in hyps], [str(r) for r in refs])
        name = "accuracy"
    corpus = ScoredCorpus(
        metric_name=name, score=score,
        pairs=tuple((i, str(h), str(r)) for i, h, r in zip(ids, hyps, refs)),
    )
    with open(out / "metric.json", "w", encoding="utf-8") as fh:
        json.dump(corpus.to_json_dict(config), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    (out / "metric.csv").write_text(f"metric,score,n\n{name},{score:.6f},{len(hyps)}\n", encoding="utf-8")
    click.echo(f"{name}: {score:.4f} over {len(hyps)} pair(s) -> {out / 'metric.json'}")


def _endpoint(url, model, temperature, max_in_flight) -> JudgeEndpoint:
    if not url or not model:
        raise ConfigError("an endpoint --url and --model are required")
    return JudgeEndpoint(url=url, model=model, temperature=temperature, max_in_flight=max_in_flight)


@main.command(name="llm-score")
@click.option("--url", help="chat-completion endpoint URL")
@click.option("--model", help="judge model id")
@click.option("--prompt", "prompt_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--max-in-flight", type=int, default=4, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--sample", type=int, help="score only a seeded sample of this size")
@_opt_in
@_opt_figures
@_opt_out
def llm_score(url, model, prompt_path, temperature, max_in_flight, seed, sample, input_path, figures, output_dir):
    """Score every data point 0-5 with an LLM judge and bucket the results."""
    if not input_path:
        raise ConfigError("llm-score needs a translated dataset (--in)")
    endpoint = _endpoint(url, model, temperature, max_in_flight)
    template = Path(prompt_path).read_text("utf-8") if prompt_path else default_template("score")
    records = read_jsonl(input_path)
    scores, hist = score_dataset(endpoint, records, template, seed, sample_size=sample)
    out = Path(output_dir)
    write_jsonl(out / "scores.jsonl", [dataclasses.asdict(s) for s in scores])
    summary = {
        "histogram": hist,
        "n": len(scores),
        "unparseable": sum(1 for s in scores if s.unparseable),
        "failed": sum(1 for s in scores if s.error is not None),
        "model": model,
        "seed": seed,
    }
    with open(out / "histogram.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    if figures:
        save_score_histogram(hist, out / "histogram.png")
    click.echo(
        f"llm-score: {len(scores)} scored ({summary['unparseable']} unparseable, "
        f"{summary['failed']} failed) -> {out}"
    )


@main.command(name="llm-pairwise")
@click.option("--separate", "separate_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="dataset translated per component")
@click.option("--itcs", "itcs_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="dataset translated as concatenated sequences")
@click.option("--url")
@click.option("--model")
@click.option("--prompt", "prompt_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--max-in-flight", type=int, default=4, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--sample", type=int, default=200, show_default=True)
@_opt_figures
@_opt_out
def llm_pairwise(separate_path, itcs_path, url, model, prompt_path, temperature, max_in_flight,
                 seed, sample, figures, output_dir):
    """Pairwise-judge the two translation strategies with randomized order."""
    endpoint = _endpoint(url, model, temperature, max_in_flight)
    template = Path(prompt_path).read_text("utf-8") if prompt_path else default_template("pairwise")
    separate_ds = {r["id"]: r for r in read_jsonl(separate_path)}
    itcs_ds = {r["id"]: r for r in read_jsonl(itcs_path)}
    shared = sorted(set(separate_ds) & set(itcs_ds))
    if not shared:
        raise EmptyIntersectionError("the two datasets share no ids")
    pairs = [(separate_ds[rid], itcs_ds[rid]) for rid in shared]
    records, tallies = pairwise_eval(endpoint, pairs, template, seed, sample_size=sample)
    out = Path(output_dir)
    write_jsonl(out / "pairwise.jsonl", [dataclasses.asdict(r) for r in records])
    summary = {
        "tallies": tallies,
        "n": len(records),
        "unparseable": sum(1 for r in records if r.unparseable),
        "failed": sum(1 for r in records if r.error is not None),
        "model": model,
        "seed": seed,
    }
    with open(out / "tallies.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    if figures:
        save_pairwise_tallies(
            {SEPARATE_TAG: tallies[SEPARATE_TAG], ITCS_TAG: tallies[ITCS_TAG], "tie": tallies["tie"]},
            out / "tallies.png",
        )
    click.echo(f"llm-pairwise: {len(records)} pair(s), tallies {tallies} -> {out}")


def run(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        main.main(args=argv, standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.format_message())
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except (DatasetError, BuildError, OutcomeMismatchError, EmptyIntersectionError, MissingCellError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (BackendError, JudgeError) as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(run())
