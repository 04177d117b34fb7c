"""Accuracy report assembly and rendering.

An EvalReport holds one row per (configuration label, direction) plus
per-label aggregates: the arithmetic mean of the direction accuracies
and half the spread between them, the "mean +/- half-range" presentation
used for two-fold results. Reports serialize to JSON (byte-deterministic
for a given build) and to an aligned-column plain-text table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import LengthMismatchError


@dataclass(frozen=True)
class EvalRow:
    label: str
    direction: str
    accuracy: float | None
    n_queries: int
    status: str = "ok"


@dataclass(frozen=True)
class Aggregate:
    label: str
    mean: float
    half_range: float


@dataclass(frozen=True)
class EvalReport:
    title: str
    rows: tuple[EvalRow, ...]
    aggregates: tuple[Aggregate, ...] = ()
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, title: str, rows, meta: dict | None = None, aggregate: bool = True) -> "EvalReport":
        rows = tuple(rows)
        aggregates = tuple(_aggregate(rows)) if aggregate else ()
        return cls(title=title, rows=rows, aggregates=aggregates, meta=dict(meta or {}))

    def labels(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.label not in seen:
                seen.append(row.label)
        return seen

    def directions(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.direction not in seen:
                seen.append(row.direction)
        return seen

    def row(self, label: str, direction: str) -> EvalRow:
        for r in self.rows:
            if r.label == label and r.direction == direction:
                return r
        raise KeyError((label, direction))

    def aggregate(self, label: str) -> Aggregate:
        for a in self.aggregates:
            if a.label == label:
                return a
        raise KeyError(label)

    def validate(self) -> None:
        """Recompute aggregates from the rows and require equality."""
        if self.aggregates and tuple(_aggregate(self.rows)) != self.aggregates:
            raise LengthMismatchError("aggregates do not match their rows")
        for row in self.rows:
            if row.accuracy is not None and not 0.0 <= row.accuracy <= 100.0:
                raise LengthMismatchError(f"accuracy out of range: {row.accuracy}")

    def to_json_dict(self) -> dict:
        return {
            "title": self.title,
            "rows": [
                {
                    "label": r.label,
                    "direction": r.direction,
                    "accuracyPercent": r.accuracy,
                    "nQueries": r.n_queries,
                    "status": r.status,
                }
                for r in self.rows
            ],
            "aggregates": [
                {"label": a.label, "meanPercent": a.mean, "halfRangePercent": a.half_range}
                for a in self.aggregates
            ],
            "meta": self.meta,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_json_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            title=str(obj["title"]),
            rows=tuple(
                EvalRow(
                    label=r["label"],
                    direction=r["direction"],
                    accuracy=r["accuracyPercent"],
                    n_queries=r["nQueries"],
                    status=r["status"],
                )
                for r in obj["rows"]
            ),
            aggregates=tuple(
                Aggregate(a["label"], a["meanPercent"], a["halfRangePercent"])
                for a in obj["aggregates"]
            ),
            meta=dict(obj.get("meta", {})),
        )

    def render_text(self) -> str:
        """Aligned-column table: one line per label, one column per direction."""
        directions = self.directions()
        headers = ["config"] + directions + (["average"] if self.aggregates else [])
        lines = []
        for label in self.labels():
            cells = [label]
            for direction in directions:
                try:
                    r = self.row(label, direction)
                except KeyError:
                    cells.append("-")
                    continue
                cells.append(f"{r.accuracy:.2f}" if r.status == "ok" else r.status)
            if self.aggregates:
                try:
                    a = self.aggregate(label)
                    cells.append(f"{a.mean:.2f} +/- {a.half_range:.2f}")
                except KeyError:
                    cells.append("-")
            lines.append(cells)
        widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
                  for i, h in enumerate(headers)]
        out = [self.title]
        out.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
        out.append("  ".join("-" * w for w in widths))
        for cells in lines:
            out.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
        return "\n".join(out) + "\n"


def _aggregate(rows) -> list[Aggregate]:
    by_label: dict[str, list[float]] = {}
    order: list[str] = []
    for row in rows:
        if row.status != "ok" or row.accuracy is None:
            continue
        if row.label not in by_label:
            by_label[row.label] = []
            order.append(row.label)
        by_label[row.label].append(row.accuracy)
    out = []
    for label in order:
        values = by_label[label]
        mean = sum(values) / len(values)
        half_range = (max(values) - min(values)) / 2.0
        out.append(Aggregate(label=label, mean=mean, half_range=half_range))
    return out
