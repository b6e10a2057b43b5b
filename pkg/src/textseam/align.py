"""Conversions between word boundaries and token-level label vectors.

Encoders label subword tokens, the evaluation labels words.  Both views
are tied together through character offsets into the same text, so the
conversions here reduce to offset comparisons with no retokenization.
Offsets count Unicode scalar values, matching Python string indexing.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

from .corpus import WordSpan
from .errors import OffsetAttributionError


@dataclass(frozen=True)
class TokenSpanLabel:
    """One labeled token: character span plus binary label.

    Label 0 marks human-written, 1 machine-generated.
    """

    start: int
    end: int
    label: int


@dataclass(frozen=True)
class LabelVector:
    """Token labels in text order, plus a truncation flag.

    ``truncated`` records that the token spans stop short of the final
    word, so a trailing all-human reading may be an artifact of model
    input limits rather than a real prediction.
    """

    labels: tuple[int, ...]
    truncated: bool


def _check_tokens(tokens: Sequence[TokenSpanLabel]) -> None:
    prev_end = -1
    for t in tokens:
        if t.start >= t.end:
            raise OffsetAttributionError(f"empty or inverted token span [{t.start}, {t.end})")
        if t.start < prev_end:
            raise OffsetAttributionError(
                f"token span [{t.start}, {t.end}) overlaps or precedes span ending at {prev_end}"
            )
        if t.label not in (0, 1):
            raise OffsetAttributionError(f"token label must be 0 or 1, got {t.label}")
        prev_end = t.end


def word_index_to_token_labels(
    words: Sequence[WordSpan],
    tokens: Sequence[TokenSpanLabel],
    boundary: int,
) -> LabelVector:
    """Project a word boundary onto token labels.

    A token is machine-labeled iff it starts at or after the first
    character of the boundary word; ``boundary == len(words)`` labels
    everything human.

    Args:
        words: Word spans of the text, in order.
        tokens: Token spans over the same text, ordered and
            non-overlapping.  Incoming labels are ignored.
        boundary: Word index of the first machine word, in
            ``[0, len(words)]``.

    Returns:
        A :class:`LabelVector` aligned with ``tokens``.
    """
    if not 0 <= boundary <= len(words):
        raise OffsetAttributionError(f"boundary {boundary} outside [0, {len(words)}]")
    _check_tokens(tokens)
    cut = words[boundary].start if boundary < len(words) else None
    labels = tuple(1 if cut is not None and t.start >= cut else 0 for t in tokens)
    if words:
        truncated = not tokens or tokens[-1].end < words[-1].end
    else:
        truncated = False
    return LabelVector(labels=labels, truncated=truncated)


def token_labels_to_word_index(
    words: Sequence[WordSpan],
    tokens: Sequence[TokenSpanLabel],
) -> int:
    """Recover the word boundary from labeled tokens.

    The first machine-labeled token decides: the boundary is the word
    containing that token's start offset.  With no machine token the text
    reads as fully human and the boundary is ``len(words)``.

    Args:
        words: Word spans of the text, in order.
        tokens: Labeled token spans over the same text, ordered and
            non-overlapping.

    Returns:
        Word index in ``[0, len(words)]``.

    Raises:
        OffsetAttributionError: if the first machine token starts outside
            every word span (in whitespace or past the text).
    """
    _check_tokens(tokens)
    first_machine = next((t for t in tokens if t.label == 1), None)
    if first_machine is None:
        return len(words)
    offset = first_machine.start
    starts = [w.start for w in words]
    i = bisect.bisect_right(starts, offset) - 1
    if i < 0 or offset >= words[i].end:
        raise OffsetAttributionError(
            f"machine token start {offset} falls outside every word span"
        )
    return i


def word_of_offset(words: Sequence[WordSpan], offset: int) -> int:
    """Map a character offset to the word it belongs to.

    Offsets inside a word map to that word; offsets in the whitespace gap
    before word ``i`` map to ``i``; offsets at or past the end of the last
    word map to ``len(words)``.  Negative offsets are rejected.
    """
    if offset < 0:
        raise OffsetAttributionError(f"negative offset {offset}")
    if not words or offset >= words[-1].end:
        return len(words)
    starts = [w.start for w in words]
    i = bisect.bisect_right(starts, offset) - 1
    if i < 0:
        return 0
    if offset < words[i].end:
        return i
    return i + 1
