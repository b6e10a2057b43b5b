"""Evaluation: mean absolute error over predicted word boundaries.

Predictions are matched to gold instances by id, exactly one each;
anything missing, duplicated, or extra is an error rather than a silent
skip, so a reported MAE always covers the whole corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .corpus import InstanceId, MixedTextInstance
from .ensemble import BoundaryPrediction
from .errors import IdMismatchError


@dataclass(frozen=True)
class InstanceScore:
    id: InstanceId
    gold: int
    pred: float
    error: float


@dataclass(frozen=True)
class EvalReport:
    """MAE plus per-instance errors, worst first."""

    mae: float
    per_instance: tuple[InstanceScore, ...]
    count: int
    truncated_count: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "mae": self.mae,
                "count": self.count,
                "truncated_count": self.truncated_count,
                "per_instance": [
                    {"id": s.id, "gold": s.gold, "pred": s.pred, "error": s.error}
                    for s in self.per_instance
                ],
            },
            ensure_ascii=False,
        )

    def to_table(self, *, limit: int = 20) -> str:
        lines = [f"MAE {self.mae:.4f} over {self.count} instances"]
        if self.truncated_count:
            lines.append(f"truncated labelings: {self.truncated_count}")
        lines.append(f"{'id':>12}  {'gold':>6}  {'pred':>8}  {'error':>8}")
        for s in self.per_instance[:limit]:
            lines.append(f"{str(s.id):>12}  {s.gold:>6}  {s.pred:>8.1f}  {s.error:>8.1f}")
        if len(self.per_instance) > limit:
            lines.append(f"... {len(self.per_instance) - limit} more")
        return "\n".join(lines)


def score(
    predictions: Sequence[BoundaryPrediction],
    golds: Sequence[MixedTextInstance],
) -> EvalReport:
    """Score predictions against gold boundaries by id.

    Args:
        predictions: Exactly one prediction per gold instance.
        golds: Instances with gold boundaries set.

    Returns:
        An :class:`EvalReport`; ``per_instance`` is sorted by descending
        error, ties in gold order.

    Raises:
        IdMismatchError: for duplicate prediction ids, predictions
            without a gold instance, gold instances without a prediction,
            or gold instances without a label.
    """
    unlabeled = [g.id for g in golds if g.gold_boundary is None]
    if unlabeled:
        raise IdMismatchError("gold instances without a label", unlabeled)
    gold_ids = [g.id for g in golds]
    dup_gold = _duplicates(gold_ids)
    if dup_gold:
        raise IdMismatchError("duplicate gold ids", dup_gold)
    pred_ids = [p.id for p in predictions]
    dup_pred = _duplicates(pred_ids)
    if dup_pred:
        raise IdMismatchError("duplicate prediction ids", dup_pred)
    gold_set = set(gold_ids)
    extra = [i for i in pred_ids if i not in gold_set]
    if extra:
        raise IdMismatchError("predictions without a gold instance", extra)
    by_id = {p.id: p for p in predictions}
    missing = [i for i in gold_ids if i not in by_id]
    if missing:
        raise IdMismatchError("gold instances without a prediction", missing)

    scores = []
    truncated = 0
    for position, gold in enumerate(golds):
        pred = by_id[gold.id]
        assert gold.gold_boundary is not None
        err = abs(pred.value - gold.gold_boundary)
        scores.append((err, position, InstanceScore(gold.id, gold.gold_boundary, pred.value, err)))
        if pred.truncated:
            truncated += 1
    scores.sort(key=lambda t: (-t[0], t[1]))
    mae = sum(err for err, _, _ in scores) / len(scores) if scores else 0.0
    return EvalReport(
        mae=mae,
        per_instance=tuple(s for _, _, s in scores),
        count=len(scores),
        truncated_count=truncated,
    )


def _duplicates(ids: Sequence[InstanceId]) -> list[InstanceId]:
    seen: set[InstanceId] = set()
    dups: list[InstanceId] = []
    for i in ids:
        if i in seen and i not in dups:
            dups.append(i)
        seen.add(i)
    return dups


def error_histogram(report: EvalReport, width: float = 1.0) -> dict[float, int]:
    """Bucket per-instance errors by ``width``; keys are bucket starts."""
    if width <= 0:
        raise ValueError("width must be positive")
    hist: dict[float, int] = {}
    for s in report.per_instance:
        bucket = int(s.error // width) * width
        hist[bucket] = hist.get(bucket, 0) + 1
    return dict(sorted(hist.items()))
