"""Labeling-stage I/O: training example assembly and boundary decoding.

Training examples pair a text (optionally carrying the generation
stage's ``<BREAK>`` marker) with its gold boundary.  At inference time a
labeler returns per-token binary labels over the marked text; decoding
maps the first machine token back to a word index of the original,
marker-free text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .align import TokenSpanLabel, token_labels_to_word_index
from .corpus import InstanceId, MixedTextInstance, tokenize_words
from .decoder_post import BREAK_TOKEN, insert_break
from .ensemble import BoundaryPrediction
from .errors import IdMismatchError


@dataclass(frozen=True)
class EncoderExample:
    """One labeling-stage training row."""

    id: InstanceId
    input_text: str
    gold_boundary: int
    has_break: bool


def make_training_examples(
    instances: Sequence[MixedTextInstance],
    predictions: Mapping[InstanceId, int],
    *,
    mix_source: bool = False,
    source_with_gold_break: bool = False,
) -> list[EncoderExample]:
    """Assemble labeling-stage training rows from upstream predictions.

    Every instance yields one row whose text carries the marker at the
    predicted boundary but whose label stays the gold boundary, teaching
    the labeler to overrule a misplaced marker.  With ``mix_source`` the
    original texts follow as a second block, marker-free by default or
    marked at the gold boundary with ``source_with_gold_break``.

    Args:
        instances: Gold-labeled instances, in order.
        predictions: Predicted boundary per instance id.
        mix_source: Also emit one row per original text.
        source_with_gold_break: Mark source rows at the gold boundary.

    Returns:
        Prediction rows in instance order, then source rows in instance
        order.

    Raises:
        IdMismatchError: for an instance without a prediction or without
            a gold boundary.
    """
    missing_gold = [i.id for i in instances if i.gold_boundary is None]
    if missing_gold:
        raise IdMismatchError("instances without gold boundary", missing_gold)
    missing_pred = [i.id for i in instances if i.id not in predictions]
    if missing_pred:
        raise IdMismatchError("instances without a prediction", missing_pred)

    rows: list[EncoderExample] = []
    for inst in instances:
        assert inst.gold_boundary is not None
        rows.append(
            EncoderExample(
                id=inst.id,
                input_text=insert_break(inst.text, predictions[inst.id]),
                gold_boundary=inst.gold_boundary,
                has_break=True,
            )
        )
    if mix_source:
        for inst in instances:
            assert inst.gold_boundary is not None
            text = (
                insert_break(inst.text, inst.gold_boundary)
                if source_with_gold_break
                else inst.text
            )
            rows.append(
                EncoderExample(
                    id=inst.id,
                    input_text=text,
                    gold_boundary=inst.gold_boundary,
                    has_break=source_with_gold_break,
                )
            )
    return rows


class TokenLabeler(Protocol):
    """A labeling stage: text in, labeled token spans out."""

    name: str

    def label_tokens(self, instance_id: InstanceId, text: str) -> list[TokenSpanLabel]:
        ...


def predict_boundary(backend: TokenLabeler, instance_id: InstanceId, text: str) -> BoundaryPrediction:
    """Run one text through a labeler and decode the word boundary.

    ``text`` may carry a single ``<BREAK>`` marker; tokens inside the
    marker are discarded and the decoded index is shifted so the result
    counts words of the marker-free text.

    Args:
        backend: The labeling stage to call.
        instance_id: Id passed through to the backend and the result.
        text: Input text, marked or marker-free.

    Returns:
        A :class:`BoundaryPrediction` with ``stage=backend.name`` and an
        integral value in ``[0, marker-free word count]``.
    """
    tokens = backend.label_tokens(instance_id, text)
    words = tokenize_words(text)
    marker_spans = [
        (w.index, w.start, w.end) for w in words if text[w.start:w.end] == BREAK_TOKEN
    ]
    kept_tokens = [
        t
        for t in tokens
        if not any(t.start >= s and t.end <= e for _, s, e in marker_spans)
    ]
    raw = token_labels_to_word_index(words, kept_tokens)
    shift = sum(1 for idx, _, _ in marker_spans if idx < raw)
    boundary = raw - shift
    word_count = len(words) - len(marker_spans)
    boundary = min(max(boundary, 0), word_count)
    truncated = bool(words) and (not tokens or tokens[-1].end < words[-1].end)
    return BoundaryPrediction(
        id=instance_id,
        value=float(boundary),
        stage=backend.name,
        truncated=truncated,
    )
