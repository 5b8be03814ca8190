"""Aggregating split outcomes into reversibility statistics.

Reports are mergeable values: workers accumulate privately and the shards
are combined at the end, which must equal accumulating everything in one
pass. Rates are always recomputed from counts, never stored as the source
of truth.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field

from .splitter import SplitOutcome

# column order for matrix views; unknown modes sort after the known ones
_CS_ORDER = {"none": 0, "concat": 1, "relation": 2}


class MissingCellError(Exception):
    """A matrix view was asked for a combination the report does not hold."""


@dataclass(frozen=True)
class CellKey:
    """One measured configuration: token glyph, CS mode, language, backend."""

    it: str
    cs: str
    tgt_lang: str
    backend: str


@dataclass
class Cell:
    total: int = 0
    reversible: int = 0
    failure_histogram: Counter = field(default_factory=Counter)

    @property
    def rate(self) -> float:
        return self.reversible / self.total

    def add(self, outcome: SplitOutcome) -> None:
        self.total += 1
        if outcome.reversible:
            self.reversible += 1
        else:
            self.failure_histogram[outcome.failure_reason] += 1

    def merge(self, other: Cell) -> None:
        self.total += other.total
        self.reversible += other.reversible
        self.failure_histogram.update(other.failure_histogram)


@dataclass
class ReversibilityReport:
    cells: dict[CellKey, Cell] = field(default_factory=dict)

    def accumulate(self, outcome: SplitOutcome, key: CellKey) -> None:
        cell = self.cells.get(key)
        if cell is None:
            cell = self.cells[key] = Cell()
        cell.add(outcome)

    def merge(self, other: ReversibilityReport) -> ReversibilityReport:
        """Fold another report into this one and return self."""
        for key, cell in other.cells.items():
            mine = self.cells.get(key)
            if mine is None:
                mine = self.cells[key] = Cell()
            mine.merge(cell)
        return self

    def total(self) -> int:
        return sum(c.total for c in self.cells.values())

    def reversible(self) -> int:
        return sum(c.reversible for c in self.cells.values())

    def to_json_dict(self, provenance: dict | None = None) -> dict:
        cells = [
            {
                "it": k.it,
                "cs": k.cs,
                "tgt_lang": k.tgt_lang,
                "backend": k.backend,
                "total": c.total,
                "reversible": c.reversible,
                "rate": round(c.rate, 4),
                "failure_histogram": dict(sorted(c.failure_histogram.items())),
            }
            for k, c in sorted(self.cells.items(), key=lambda kv: (kv[0].it, kv[0].cs, kv[0].tgt_lang, kv[0].backend))
        ]
        out = {"cells": cells}
        if provenance:
            out["provenance"] = provenance
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> ReversibilityReport:
        report = cls()
        for entry in data.get("cells", []):
            key = CellKey(
                it=entry["it"], cs=entry["cs"], tgt_lang=entry["tgt_lang"], backend=entry["backend"]
            )
            report.cells[key] = Cell(
                total=entry["total"],
                reversible=entry["reversible"],
                failure_histogram=Counter(entry.get("failure_histogram", {})),
            )
        return report

    def matrix_view(self, tgt_langs: list[str], backend: str | None = None) -> RateMatrix:
        """Mean reversibility per (token, CS mode), languages weighted equally.

        Every (token, CS mode, language) combination must be present; a hole
        would silently skew the mean, so it is an error instead.
        """
        backends = sorted({k.backend for k in self.cells})
        if backend is None:
            if len(backends) > 1:
                raise MissingCellError(
                    f"report holds several backends {backends}; pick one for the matrix"
                )
            if not backends:
                raise MissingCellError("report is empty")
            backend = backends[0]
        its = sorted({k.it for k in self.cells if k.backend == backend})
        cs_modes = sorted(
            {k.cs for k in self.cells if k.backend == backend},
            key=lambda m: (_CS_ORDER.get(m, len(_CS_ORDER)), m),
        )
        if not its:
            raise MissingCellError(f"report holds no cells for backend {backend!r}")
        values: list[list[float]] = []
        for it in its:
            row = []
            for cs in cs_modes:
                rates = []
                for lang in tgt_langs:
                    cell = self.cells.get(CellKey(it=it, cs=cs, tgt_lang=lang, backend=backend))
                    if cell is None or cell.total == 0:
                        raise MissingCellError(
                            f"no outcomes for it={it!r} cs={cs!r} tgt_lang={lang!r} backend={backend!r}"
                        )
                    rates.append(cell.rate)
                row.append(sum(rates) / len(rates))
            values.append(row)
        return RateMatrix(its=tuple(its), cs_modes=tuple(cs_modes), values=tuple(map(tuple, values)), backend=backend)


@dataclass(frozen=True)
class RateMatrix:
    """Token-by-CS-mode table of mean reversibility rates."""

    its: tuple[str, ...]
    cs_modes: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]
    backend: str

    def value(self, it: str, cs: str) -> float:
        return self.values[self.its.index(it)][self.cs_modes.index(cs)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["it"] + list(self.cs_modes))
        for it, row in zip(self.its, self.values):
            writer.writerow([it] + [f"{v:.4f}" for v in row])
        return buf.getvalue()
