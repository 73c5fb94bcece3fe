"""Token-level precision, recall and F1 per entity type, plus recall curves."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import IO, Optional, Sequence

from .corpus import TagAssignment


class EvaluationError(ValueError):
    pass


@dataclass
class Scores:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int
    zero_division: bool = False

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "Scores":
        zero = (tp + fp == 0) or (tp + fn == 0)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp + fn, tp, fp, fn, zero or (p + r == 0))


@dataclass
class Report:
    per_type: dict[str, Scores]
    micro: Scores
    macro: dict = field(default_factory=dict)

    def records(self) -> list[dict]:
        rows = []
        for name, s in [*self.per_type.items(), ("micro", self.micro)]:
            rows.append({"type": name, "precision": s.precision, "recall": s.recall, "f1": s.f1,
                         "support": s.support, "zero_division": s.zero_division})
        rows.append({"type": "macro", **self.macro})
        return rows

    def table(self) -> str:
        lines = [f"{'type':<12} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}"]
        for name, s in [*self.per_type.items(), ("micro", self.micro)]:
            flag = " *" if s.zero_division else ""
            lines.append(f"{name:<12} {s.precision:>9.4f} {s.recall:>9.4f} {s.f1:>9.4f} {s.support:>8d}{flag}")
        m = self.macro
        lines.append(f"{'macro':<12} {m['precision']:>9.4f} {m['recall']:>9.4f} {m['f1']:>9.4f} {m['support']:>8d}")
        if any(s.zero_division for s in [*self.per_type.values(), self.micro]):
            lines.append("* a denominator was zero; the metric is reported as 0")
        return "\n".join(lines)


def _by_doc(tas: Sequence[TagAssignment], what: str) -> dict[str, TagAssignment]:
    out = {}
    for ta in tas:
        if ta.doc_id in out:
            raise EvaluationError(f"duplicate document {ta.doc_id!r} in {what}")
        out[ta.doc_id] = ta
    return out


def token_prf(gold: Sequence[TagAssignment], pred: Sequence[TagAssignment],
              entity_types: Optional[Sequence[str]] = None) -> Report:
    """Score predictions against gold, pairing documents by id."""
    g, p = _by_doc(gold, "gold"), _by_doc(pred, "predictions")
    missing = sorted(set(g) ^ set(p))
    if missing:
        raise EvaluationError(f"document {missing[0]!r} is not present in both gold and predictions")
    counts: dict[str, list[int]] = {t: [0, 0, 0] for t in entity_types or ()}
    for doc_id in sorted(g):
        gt, pt = g[doc_id].flat_tags(), p[doc_id].flat_tags()
        if len(gt) != len(pt):
            raise EvaluationError(f"document {doc_id!r}: {len(gt)} gold tags vs {len(pt)} predicted")
        for a, b in zip(gt, pt):
            if a.type is not None:
                counts.setdefault(a.type, [0, 0, 0])
            if b.type is not None:
                counts.setdefault(b.type, [0, 0, 0])
            if a.type is not None and a.type == b.type:
                counts[a.type][0] += 1
                continue
            if b.type is not None:
                counts[b.type][1] += 1
            if a.type is not None:
                counts[a.type][2] += 1
    per_type = {t: Scores.from_counts(*c) for t, c in counts.items()}
    micro = Scores.from_counts(*(sum(c[i] for c in counts.values()) for i in range(3)))
    n = len(per_type) or 1
    macro = {
        "precision": sum(s.precision for s in per_type.values()) / n,
        "recall": sum(s.recall for s in per_type.values()) / n,
        "f1": sum(s.f1 for s in per_type.values()) / n,
        "support": sum(s.support for s in per_type.values()),
    }
    return Report(per_type, micro, macro)


def recall_curve(per_iteration: Sequence[Sequence[TagAssignment]], gold: Sequence[TagAssignment],
                 entity_types: Optional[Sequence[str]] = None) -> dict[str, list[float]]:
    """Recall per iteration for each type and for the micro average."""
    if not per_iteration:
        raise EvaluationError("recall curve needs at least one iteration")
    series: dict[str, list[float]] = {}
    for preds in per_iteration:
        rep = token_prf(gold, preds, entity_types)
        for t, s in rep.per_type.items():
            series.setdefault(t, []).append(s.recall)
        series.setdefault("micro", []).append(rep.micro.recall)
    return series


def recall_table(series: dict[str, list[float]]) -> str:
    names = list(series)
    n = max(len(v) for v in series.values())
    lines = ["iteration\t" + "\t".join(names)]
    for i in range(n):
        lines.append(f"{i}\t" + "\t".join(f"{series[k][i]:.6f}" for k in names))
    return "\n".join(lines) + "\n"


def write_report(report: Report, stream: IO[str]) -> None:
    for rec in report.records():
        stream.write(json.dumps(rec, sort_keys=True) + "\n")


def report_to_dict(report: Report) -> dict:
    return {"per_type": {t: asdict(s) for t, s in report.per_type.items()},
            "micro": asdict(report.micro), "macro": report.macro}
