"""Deciding reversibility of translated sequences and rebuilding data points.

A translated sequence is reversible only when the indicator token survived
translation exactly once per component. Anything else is discarded as a
verdict, never an exception: failure is data here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .schema import Component, DataPoint, TaskSchema

VERDICT_REVERSIBLE = "reversible"
VERDICT_NOT_REVERSIBLE = "not_reversible"

REASON_IT_COUNT_LOW = "it_count_low"
REASON_IT_COUNT_HIGH = "it_count_high"
REASON_EMPTY_COMPONENT = "empty_component"
# Reserved for stricter splitting policies. The default policy discards any
# text before the first token unexamined (it is the translated catalyst
# region), so this reason is declared but never emitted here.
REASON_LEADING_CONTENT = "leading_content_before_cs_boundary_violation"

FAILURE_REASONS = (
    REASON_IT_COUNT_LOW,
    REASON_IT_COUNT_HIGH,
    REASON_EMPTY_COMPONENT,
    REASON_LEADING_CONTENT,
)


class OutcomeMismatchError(Exception):
    """An outcome was paired with a data point it does not belong to."""


@dataclass(frozen=True)
class SplitOutcome:
    """Either reconstructed translated components or a non-reversibility verdict."""

    source_id: str
    verdict: str
    components: tuple[tuple[str, str], ...] | None = None
    failure_reason: str | None = None

    @property
    def reversible(self) -> bool:
        return self.verdict == VERDICT_REVERSIBLE


def split_sequence(
    translated: str,
    it,
    n_components: int,
    *,
    source_id: str = "",
    component_names: Sequence[str] | None = None,
) -> SplitOutcome:
    """Split a translated sequence back into components, or rule it out.

    The glyph must occur exactly ``n_components`` times: fewer means the
    translator ate a boundary, more means it duplicated one and the
    segmentation is ambiguous. Text before the first glyph is the translated
    catalyst region and is discarded unexamined. Glyphs fused to punctuation
    still count; the punctuation stays with the neighboring component.
    """
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if component_names is not None and len(component_names) != n_components:
        raise ValueError("component_names length must equal n_components")
    glyph = it.glyph
    count = translated.count(glyph)
    if count != n_components:
        reason = REASON_IT_COUNT_LOW if count < n_components else REASON_IT_COUNT_HIGH
        return SplitOutcome(source_id=source_id, verdict=VERDICT_NOT_REVERSIBLE, failure_reason=reason)
    segments = [seg.strip() for seg in translated.split(glyph)[1:]]
    if any(not seg for seg in segments):
        return SplitOutcome(
            source_id=source_id, verdict=VERDICT_NOT_REVERSIBLE, failure_reason=REASON_EMPTY_COMPONENT
        )
    names = list(component_names) if component_names is not None else [str(i) for i in range(n_components)]
    return SplitOutcome(
        source_id=source_id,
        verdict=VERDICT_REVERSIBLE,
        components=tuple(zip(names, segments)),
    )


def reassemble(dp: DataPoint, outcome: SplitOutcome, schema: TaskSchema) -> DataPoint:
    """Build the translated data point from a reversible outcome.

    The id and label pass through untouched; component names follow the
    schema's declared order.
    """
    if outcome.source_id != dp.id:
        raise OutcomeMismatchError(f"outcome belongs to {outcome.source_id!r}, not {dp.id!r}")
    if not outcome.reversible:
        raise OutcomeMismatchError(f"outcome for {dp.id!r} is not reversible ({outcome.failure_reason})")
    texts = [text for _, text in outcome.components]
    if len(texts) != len(schema.component_names):
        raise OutcomeMismatchError(
            f"outcome for {dp.id!r} has {len(texts)} components, schema declares "
            f"{len(schema.component_names)}"
        )
    components = tuple(
        Component(name=name, text=text) for name, text in zip(schema.component_names, texts)
    )
    return DataPoint(id=dp.id, components=components, label=dp.label)
