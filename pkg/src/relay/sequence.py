"""Rendering data points into single translation sequences.

A sequence is an optional catalyst statement followed by each component
prefixed with the indicator token: ``CS IT comp1 IT comp2 ...``. Components
are sanitized first so the token glyph occurs exactly once per component
boundary and nowhere else, which is what makes the sequence invertible
after translation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .schema import DataPoint, Label, TaskSchema, label_word

DEFAULT_IT_GLYPHS = ("@", "#", "*")

CS_NONE = "none"
CS_CONCAT = "concat"
CS_RELATION = "relation"
CS_MODES = (CS_NONE, CS_CONCAT, CS_RELATION)

LAYOUT_FLAT = "flat"
LAYOUT_LINES = "lines"

LABEL_WORD_SLOT = "{label_word}"

# Built-in relation statements; the label word is substituted per record.
RELATION_TEMPLATES = {
    "nli": "The following two sentences are in the {label_word} relation",
    "wpr": (
        "Using the first sentence as a query, we obtained the following search results. "
        "We evaluate these results as {label_word}"
    ),
    "qg": "The second sentence is a question that can be generated after reading the first passage",
}

# Default connective when no relation is asserted; overridable per task.
DEFAULT_CONCAT_TEMPLATE = "The following statements appear together."

_WS_RUN = re.compile(r"\s+")


class BuildError(Exception):
    """A data point cannot be rendered into a valid translation sequence."""


@dataclass(frozen=True)
class IndicatorToken:
    """Single reserved character prepended to each component."""

    glyph: str

    def __post_init__(self):
        if len(self.glyph) != 1:
            raise BuildError(f"indicator token must be one character, got {self.glyph!r}")
        if self.glyph.isspace():
            raise BuildError("indicator token must not be whitespace")
        if self.glyph.isalnum():
            raise BuildError(f"indicator token must not be alphanumeric, got {self.glyph!r}")


@dataclass(frozen=True)
class CatalystMode:
    """Catalyst statement mode plus the templates resolved for one task."""

    mode: str
    relation_template: str | None = None
    concat_template: str | None = None

    def __post_init__(self):
        if self.mode not in CS_MODES:
            raise BuildError(f"catalyst mode must be one of {CS_MODES}, got {self.mode!r}")


def load_cs_templates(path) -> dict[str, dict[str, str]]:
    """Load per-task template overrides: ``{task: {"relation": ..., "concat": ...}}``."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise BuildError(f"template file {path} must hold a JSON object")
    out: dict[str, dict[str, str]] = {}
    for task, entry in raw.items():
        if not isinstance(entry, dict):
            raise BuildError(f"template entry for task {task!r} must be an object")
        out[task] = {k: v for k, v in entry.items() if k in (CS_RELATION, CS_CONCAT)}
    return out


def catalyst_mode(
    mode: str,
    schema: TaskSchema,
    templates: dict[str, dict[str, str]] | None = None,
) -> CatalystMode:
    """Resolve the catalyst templates for a task and validate slot usage.

    Relation templates for labeled tasks must carry exactly one
    ``{label_word}`` slot; unlabeled tasks must carry none.
    """
    overrides = (templates or {}).get(schema.task_name, {})
    relation = overrides.get(CS_RELATION, RELATION_TEMPLATES.get(schema.task_name))
    concat = overrides.get(CS_CONCAT, DEFAULT_CONCAT_TEMPLATE)
    if mode == CS_RELATION:
        if relation is None:
            raise BuildError(
                f"no relation template for task {schema.task_name!r}; supply one via a template file"
            )
        slots = relation.count(LABEL_WORD_SLOT)
        if schema.labeled and slots != 1:
            raise BuildError(
                f"relation template for labeled task {schema.task_name!r} must contain "
                f"exactly one {LABEL_WORD_SLOT} slot, found {slots}"
            )
        if not schema.labeled and slots != 0:
            raise BuildError(
                f"relation template for unlabeled task {schema.task_name!r} must not "
                f"contain a {LABEL_WORD_SLOT} slot"
            )
    return CatalystMode(mode=mode, relation_template=relation, concat_template=concat)


def render_cs(cs: CatalystMode, schema: TaskSchema, label: Label | None = None) -> str:
    """Render the catalyst statement for one data point."""
    if cs.mode == CS_NONE:
        return ""
    if cs.mode == CS_CONCAT:
        return cs.concat_template or DEFAULT_CONCAT_TEMPLATE
    template = cs.relation_template
    if template is None:
        raise BuildError(f"relation catalyst requested but no template resolved for {schema.task_name!r}")
    if LABEL_WORD_SLOT not in template:
        return template
    if label is None:
        raise BuildError(f"relation catalyst for task {schema.task_name!r} needs a label")
    return template.replace(LABEL_WORD_SLOT, label_word(schema, label))


def sanitize_component(text: str, it: IndicatorToken) -> str:
    """Make a component safe to embed: strip the token glyph, collapse whitespace."""
    return _WS_RUN.sub(" ", text.replace(it.glyph, " ")).strip()


@dataclass(frozen=True)
class TranslationSequence:
    """A rendered sequence plus the metadata needed to invert it."""

    source_id: str
    text: str
    it: IndicatorToken
    n_components: int
    cs_mode: str
    component_names: tuple[str, ...]


def build_sequence(
    dp: DataPoint,
    it: IndicatorToken,
    cs: CatalystMode,
    schema: TaskSchema,
    layout: str = LAYOUT_FLAT,
) -> TranslationSequence:
    """Render one data point into a single translation sequence.

    Flat layout (default) joins everything with single spaces; the lines
    layout puts the catalyst statement and each component on its own line.
    """
    if layout not in (LAYOUT_FLAT, LAYOUT_LINES):
        raise BuildError(f"unknown layout {layout!r}")
    if len(dp.components) < 2:
        raise BuildError(
            f"data point {dp.id!r} has {len(dp.components)} component(s); "
            "concatenation needs at least 2 (use separate mode)"
        )
    cs_text = sanitize_component(render_cs(cs, schema, dp.label), it)
    parts = []
    for comp in dp.components:
        clean = sanitize_component(comp.text, it)
        if not clean:
            raise BuildError(f"component {comp.name!r} of {dp.id!r} is empty after sanitization")
        parts.append(clean)
    if layout == LAYOUT_FLAT:
        text = (cs_text + "".join(f" {it.glyph} {p}" for p in parts)).lstrip()
    else:
        lines = ([cs_text] if cs_text else []) + [f"{it.glyph} {p}" for p in parts]
        text = "\n".join(lines)
    if text.count(it.glyph) != len(parts):
        raise BuildError(f"sequence for {dp.id!r} does not contain exactly one glyph per component")
    return TranslationSequence(
        source_id=dp.id,
        text=text,
        it=it,
        n_components=len(parts),
        cs_mode=cs.mode,
        component_names=tuple(c.name for c in dp.components),
    )


def build_separate(dp: DataPoint) -> list[tuple[str, str]]:
    """Baseline: one translation unit per component, no catalyst, no token."""
    return [(c.name, c.text) for c in dp.components]
