"""Dataset schemas, data points, and JSONL ingestion.

A data point is an ordered set of named text components plus an optional
label. The task schema fixes the component order, the label space, and the
label-word mapping used when a relation statement is rendered. All text is
normalized to NFC on ingestion so downstream comparisons are exact-codepoint.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Union

Label = Union[int, str]


class DatasetError(Exception):
    """Base class for ingestion and validation failures."""

    def __init__(self, message: str, *, line_no: int | None = None, record_id: str | None = None):
        self.line_no = line_no
        self.record_id = record_id
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if record_id is not None:
            where.append(f"id {record_id!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ParseError(DatasetError):
    """A line is not a well-formed dataset record."""


class SchemaMismatchError(DatasetError):
    """A record's components do not match the schema's component names."""


class LabelError(DatasetError):
    """A label is missing, undeclared, or outside the schema's label space."""


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class Component:
    """One named text component of a data point."""

    name: str
    text: str

    def __post_init__(self):
        if not self.name:
            raise DatasetError("component name is empty")
        if not self.text.strip():
            raise DatasetError(f"component {self.name!r} has empty text")


@dataclass(frozen=True)
class TaskSchema:
    """Declares a task's component names, order, and label handling.

    ``label_words`` maps each label value to the word used in relation
    statements; when present it must cover ``label_space`` exactly and
    injectively. Labels are metadata and are never translated.
    """

    task_name: str
    component_names: tuple[str, ...]
    label_space: tuple[Label, ...] | None = None
    label_words: Mapping[Label, str] | None = None
    translate_label: bool = False

    def __post_init__(self):
        if not self.component_names:
            raise DatasetError(f"schema {self.task_name!r} declares no components")
        if len(set(self.component_names)) != len(self.component_names):
            raise DatasetError(f"schema {self.task_name!r} has duplicate component names")
        if self.translate_label:
            raise DatasetError("labels are metadata and are never translated")
        if self.label_words is not None:
            if self.label_space is None:
                raise DatasetError(f"schema {self.task_name!r} maps label words without a label space")
            declared = set(self.label_space)
            mapped = set(self.label_words)
            if declared != mapped:
                raise DatasetError(
                    f"schema {self.task_name!r} label words must cover the label space exactly; "
                    f"missing={sorted(map(str, declared - mapped))} extra={sorted(map(str, mapped - declared))}"
                )
            words = list(self.label_words.values())
            if len(set(words)) != len(words):
                raise DatasetError(f"schema {self.task_name!r} label words are not distinct")

    @property
    def labeled(self) -> bool:
        return self.label_space is not None


@dataclass(frozen=True)
class DataPoint:
    """One multi-component training instance."""

    id: str
    components: tuple[Component, ...]
    label: Label | None = None

    def __post_init__(self):
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate component names", record_id=self.id)

    def component_texts(self) -> tuple[str, ...]:
        return tuple(c.text for c in self.components)

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)


NLI_SCHEMA = TaskSchema(
    task_name="nli",
    component_names=("premise", "hypothesis"),
    label_space=(0, 1, 2),
    label_words={0: "entailment", 1: "neutral", 2: "contradiction"},
)

WPR_SCHEMA = TaskSchema(
    task_name="wpr",
    component_names=("snippet", "query", "title"),
    label_space=(0, 1, 2, 3, 4),
    label_words={4: "perfect", 3: "excellent", 2: "good", 1: "fair", 0: "bad"},
)

QG_SCHEMA = TaskSchema(
    task_name="qg",
    component_names=("passage", "question"),
)

_BUILTIN = {"nli": NLI_SCHEMA, "wpr": WPR_SCHEMA, "qg": QG_SCHEMA}


def builtin_schema(task_name: str) -> TaskSchema:
    """Return the built-in schema for nli, wpr, or qg."""
    try:
        return _BUILTIN[task_name]
    except KeyError:
        raise DatasetError(
            f"unknown task {task_name!r}; built-ins are {sorted(_BUILTIN)} "
            "(supply a schema file for custom tasks)"
        ) from None


def label_word(schema: TaskSchema, label: Label) -> str:
    """Map a label value to its label word."""
    if schema.label_words is None:
        raise LabelError(f"schema {schema.task_name!r} declares no label words")
    try:
        return schema.label_words[label]
    except KeyError:
        raise LabelError(f"label {label!r} is not declared by schema {schema.task_name!r}") from None


def load_schema(path) -> TaskSchema:
    """Load a custom task schema from a JSON file.

    Expected fields: task_name, component_names, optional label_space,
    optional label_words. JSON object keys are strings, so label_words keys
    are coerced back to the matching label_space values.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DatasetError(f"schema file {path} must hold a JSON object")
    try:
        task_name = raw["task_name"]
        component_names = tuple(raw["component_names"])
    except KeyError as exc:
        raise DatasetError(f"schema file {path} is missing {exc.args[0]!r}") from None
    label_space = raw.get("label_space")
    label_words = raw.get("label_words")
    space = tuple(label_space) if label_space is not None else None
    words = None
    if label_words is not None:
        if space is None:
            raise DatasetError(f"schema file {path} has label_words but no label_space")
        by_str = {str(v): v for v in space}
        words = {}
        for key, word in label_words.items():
            if key not in by_str:
                raise DatasetError(f"schema file {path}: label word key {key!r} is not in label_space")
            words[by_str[key]] = word
    return TaskSchema(
        task_name=task_name,
        component_names=component_names,
        label_space=space,
        label_words=words,
    )


def datapoint_from_record(record: dict, schema: TaskSchema, *, line_no: int | None = None) -> DataPoint:
    """Validate one decoded JSONL record against the schema."""
    if not isinstance(record, dict):
        raise ParseError("record is not a JSON object", line_no=line_no)
    rid = record.get("id")
    if not isinstance(rid, str) or not rid:
        raise ParseError("record has no string 'id'", line_no=line_no)
    comps = record.get("components")
    if not isinstance(comps, dict):
        raise SchemaMismatchError("record has no 'components' object", line_no=line_no, record_id=rid)
    missing = [n for n in schema.component_names if n not in comps]
    if missing:
        raise SchemaMismatchError(
            f"missing component {missing[0]!r}", line_no=line_no, record_id=rid
        )
    extra = [n for n in comps if n not in schema.component_names]
    if extra:
        raise SchemaMismatchError(
            f"undeclared component {extra[0]!r}", line_no=line_no, record_id=rid
        )
    components = []
    for name in schema.component_names:
        text = comps[name]
        if not isinstance(text, str) or not text.strip():
            raise SchemaMismatchError(
                f"component {name!r} is not non-empty text", line_no=line_no, record_id=rid
            )
        components.append(Component(name=name, text=_nfc(text)))
    label = record.get("label")
    if schema.labeled:
        if label is None:
            raise LabelError("label is required by the schema", line_no=line_no, record_id=rid)
        if isinstance(label, str):
            label = _nfc(label)
        if label not in schema.label_space:
            raise LabelError(
                f"label {label!r} is outside the label space {list(schema.label_space)}",
                line_no=line_no,
                record_id=rid,
            )
    elif label is not None:
        raise LabelError("label given but the schema declares none", line_no=line_no, record_id=rid)
    return DataPoint(id=rid, components=tuple(components), label=label)


def datapoint_to_record(dp: DataPoint) -> dict:
    """Serialize a data point back to the JSONL record shape."""
    return {
        "id": dp.id,
        "components": {c.name: c.text for c in dp.components},
        "label": dp.label,
    }


def parse_dataset(
    stream: Union[IO[bytes], IO[str], Iterable[Union[str, bytes]]],
    schema: TaskSchema,
    *,
    strict: bool = True,
    errors: list[DatasetError] | None = None,
) -> list[DataPoint]:
    """Parse a JSONL dataset stream into validated data points, in file order.

    In strict mode the first bad record raises. In lenient mode bad records
    are skipped and their errors appended to ``errors`` (when given), so the
    caller can count what was dropped.
    """
    points: list[DataPoint] = []
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                err = ParseError(f"not valid UTF-8: {exc}", line_no=line_no)
                if strict:
                    raise err from None
                if errors is not None:
                    errors.append(err)
                continue
        line = raw.strip()
        if not line:
            continue
        try:
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON: {exc.msg}", line_no=line_no) from None
            points.append(datapoint_from_record(record, schema, line_no=line_no))
        except DatasetError as err:
            if strict:
                raise
            if errors is not None:
                errors.append(err)
    return points
