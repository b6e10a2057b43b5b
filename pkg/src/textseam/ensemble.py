"""Boundary predictions and cross-stage averaging.

Per-stage predictions for the same instance are combined by plain
arithmetic mean, then rounded back to a word index and clamped into the
instance's valid range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .corpus import InstanceId
from .decoder_post import AlignMethod
from .errors import CorpusFormatError, IdMismatchError, LineProblem


@dataclass(frozen=True)
class BoundaryPrediction:
    """One stage's boundary estimate for one instance.

    ``value`` stays a float so averaged intermediates lose nothing;
    final emitted predictions carry integral values.  ``method`` and
    ``score`` describe how a generation reply was aligned, when the
    prediction came from the generation stage.  ``truncated`` flags that
    the labeling stage did not cover the full text.
    """

    id: InstanceId
    value: float
    stage: str = ""
    method: AlignMethod | None = None
    score: float | None = None
    truncated: bool = False


def parse_predictions_jsonl(stream: IO[str] | Iterable[str] | str) -> list[BoundaryPrediction]:
    """Parse a predictions JSONL file, preserving input order.

    Rows need ``id`` and a non-negative numeric ``label``; ``method``,
    ``score``, and ``truncated`` are optional.  Invalid lines are
    collected and reported together, like corpus parsing.
    """
    # "\n"-split only; see corpus parsing for why splitlines would break.
    lines = stream.split("\n") if isinstance(stream, str) else stream
    predictions: list[BoundaryPrediction] = []
    problems: list[LineProblem] = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(LineProblem(line_number, f"malformed JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            problems.append(LineProblem(line_number, "not a JSON object"))
            continue
        instance_id = obj.get("id")
        if isinstance(instance_id, bool) or not isinstance(instance_id, (int, str)):
            problems.append(LineProblem(line_number, f"id must be text or integer, got {instance_id!r}"))
            continue
        label = obj.get("label")
        if isinstance(label, bool) or not isinstance(label, (int, float)) or label < 0:
            problems.append(LineProblem(line_number, f"label must be a non-negative number, got {label!r}"))
            continue
        method_raw = obj.get("method")
        method = None
        if method_raw is not None:
            try:
                method = AlignMethod(method_raw)
            except ValueError:
                problems.append(LineProblem(line_number, f"unknown method {method_raw!r}"))
                continue
        score = obj.get("score")
        if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
            problems.append(LineProblem(line_number, f"score must be numeric, got {score!r}"))
            continue
        predictions.append(
            BoundaryPrediction(
                id=instance_id,
                value=float(label),
                method=method,
                score=None if score is None else float(score),
                truncated=bool(obj.get("truncated", False)),
            )
        )
    if problems:
        raise CorpusFormatError(problems)
    return predictions


Rounding = str

_ROUNDINGS = ("half-away", "floor", "nearest-even")


def _round(x: float, mode: Rounding) -> int:
    if mode == "half-away":
        return int(math.copysign(math.floor(abs(x) + 0.5), x))
    if mode == "floor":
        return int(math.floor(x))
    if mode == "nearest-even":
        return round(x)
    raise ValueError(f"unknown rounding mode {mode!r}; expected one of {_ROUNDINGS}")


def aggregate(
    groups: Mapping[InstanceId, Sequence[BoundaryPrediction]],
    word_counts: Mapping[InstanceId, int],
    *,
    rounding: Rounding = "half-away",
) -> list[BoundaryPrediction]:
    """Average each instance's stage predictions into one final boundary.

    Args:
        groups: Per-instance predictions, at least one each.  Iteration
            order of the mapping fixes the output order.
        word_counts: Word count per instance, the upper clamp bound.
        rounding: "half-away" (default, .5 rounds away from zero),
            "floor", or "nearest-even".

    Returns:
        One prediction per instance with ``stage="ensemble"`` and an
        integral value in ``[0, word_count]``.

    Raises:
        IdMismatchError: for an empty prediction group, a group filed
            under a different instance's id, or a missing word count.
    """
    _round(0.0, rounding)
    out: list[BoundaryPrediction] = []
    for instance_id, predictions in groups.items():
        if not predictions:
            raise IdMismatchError("no predictions to aggregate", [instance_id])
        stray = [p.id for p in predictions if p.id != instance_id]
        if stray:
            raise IdMismatchError(
                f"group {instance_id!r} contains predictions for other instances", stray
            )
        if instance_id not in word_counts:
            raise IdMismatchError("no word count for instance", [instance_id])
        mean = sum(p.value for p in predictions) / len(predictions)
        value = min(max(_round(mean, rounding), 0), word_counts[instance_id])
        out.append(
            BoundaryPrediction(
                id=instance_id,
                value=float(value),
                stage="ensemble",
                truncated=any(p.truncated for p in predictions),
            )
        )
    return out
