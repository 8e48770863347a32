"""Evaluation: hits@1, recall@k / precision@k, per-category and gate reports.

Retrieval metrics follow the ranked-list conventions: R@k asks whether any
labeled article shows up in the top k; P@k is the per-question fraction of
labeled articles found in the top k, macro-averaged over questions.
Questions with no labels are excluded from both and counted separately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

DEFAULT_KS = (1, 10, 30, 100)


@dataclass
class PredictionRecord:
    """One question's prediction with enough provenance for all reports."""

    qid: int
    ranked: list[tuple[int, float]]  # (entity id, probability), best first
    gold: frozenset[int]
    gate: float | None = None
    category: str | None = None

    def top1(self) -> int:
        return self.ranked[0][0] if self.ranked else -1

    def correct(self) -> bool:
        return self.top1() in self.gold


def hits_at_1(records: list[PredictionRecord]) -> float:
    """Fraction of questions whose top entity is among the gold answers."""
    if not records:
        return 0.0
    return sum(1 for r in records if r.correct()) / len(records)


def recall_at_k(rankings: list[list[int]], oracle: list[frozenset[int]], k: int) -> float:
    """Fraction of labeled questions with a labeled article in the top k."""
    hits = 0
    total = 0
    for ranked, labels in zip(rankings, oracle):
        if not labels:
            continue
        total += 1
        if any(aid in labels for aid in ranked[:k]):
            hits += 1
    return hits / total if total else 0.0


def precision_at_k(rankings: list[list[int]], oracle: list[frozenset[int]], k: int) -> float:
    """Macro average of |labels in top k| / |labels| over labeled questions."""
    fractions = []
    for ranked, labels in zip(rankings, oracle):
        if not labels:
            continue
        found = sum(1 for aid in ranked[:k] if aid in labels)
        fractions.append(found / len(labels))
    return sum(fractions) / len(fractions) if fractions else 0.0


def gate_ratio(records: list[PredictionRecord]) -> dict[str, float]:
    """Per category, the fraction of questions with the gate open (g > 0.5)."""
    open_counts: dict[str, int] = {}
    totals: dict[str, int] = {}
    for r in records:
        cat = r.category if r.category is not None else "unknown"
        totals[cat] = totals.get(cat, 0) + 1
        if r.gate is not None and r.gate > 0.5:
            open_counts[cat] = open_counts.get(cat, 0) + 1
    return {cat: open_counts.get(cat, 0) / totals[cat] for cat in sorted(totals)}


@dataclass
class RetrievalReport:
    recall: dict[int, float]
    precision: dict[int, float]
    n_questions: int
    n_excluded: int
    ks: tuple[int, ...] = DEFAULT_KS

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": "retrieval",
            "n_questions": self.n_questions,
            "n_excluded_empty_oracle": self.n_excluded,
            "recall": {str(k): self.recall[k] for k in self.ks},
            "precision": {str(k): self.precision[k] for k in self.ks},
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        header = "k      R@k      P@k"
        rows = [f"{k:<5d}  {self.recall[k]:.4f}  {self.precision[k]:.4f}" for k in self.ks]
        tail = f"questions={self.n_questions} excluded(empty oracle)={self.n_excluded}"
        return "\n".join([header, *rows, tail])


def retrieval_report(
    rankings: list[list[int]],
    oracle: list[frozenset[int]],
    ks: tuple[int, ...] = DEFAULT_KS,
) -> RetrievalReport:
    n_excluded = sum(1 for labels in oracle if not labels)
    return RetrievalReport(
        recall={k: recall_at_k(rankings, oracle, k) for k in ks},
        precision={k: precision_at_k(rankings, oracle, k) for k in ks},
        n_questions=len(rankings) - n_excluded,
        n_excluded=n_excluded,
        ks=ks,
    )


@dataclass
class ReaderReport:
    hits: float
    n_questions: int
    per_category: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": "reader",
            "hits_at_1": self.hits,
            "n_questions": self.n_questions,
            "per_category": self.per_category,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"hits@1 {self.hits:.4f} over {self.n_questions} questions"]
        if self.per_category:
            lines.append(f"{'category':<24} {'hits@1':>8} {'gate>0.5':>9} {'n':>6}")
            for cat, row in self.per_category.items():
                lines.append(f"{cat:<24} {row['hits_at_1']:>8.4f} {row['gate_open_ratio']:>9.4f} {int(row['n']):>6d}")
        return "\n".join(lines)


def reader_report(records: list[PredictionRecord]) -> ReaderReport:
    by_cat: dict[str, list[PredictionRecord]] = {}
    for r in records:
        cat = r.category if r.category is not None else "unknown"
        by_cat.setdefault(cat, []).append(r)
    ratios = gate_ratio(records)
    per_category = {
        cat: {
            "hits_at_1": hits_at_1(rs),
            "gate_open_ratio": ratios[cat],
            "n": float(len(rs)),
        }
        for cat, rs in sorted(by_cat.items())
    }
    return ReaderReport(hits=hits_at_1(records), n_questions=len(records), per_category=per_category)
