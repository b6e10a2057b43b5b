"""Decoder round-trip: prompting, answer parsing, suffix alignment, markers.

The generation stage is asked to repeat the machine-written suffix of a
text (or say there is none).  Everything here turns that free-form reply
back into a word boundary: parse the answer shape, locate the claimed
suffix inside the original words, and materialize the result as a
``<BREAK>`` marker for downstream encoder stages.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from enum import Enum

from .corpus import tokenize_words, word_strings
from .errors import MarkerError

BREAK_TOKEN = "<BREAK>"

_PROMPT_TEMPLATE = (
    'As an output, write only the machine-generated part of the provided text. '
    'Output must start with "Answer: ". Separate tokens by " ". '
    'If the whole text is human-written, output "None". '
    "Here is the text: {text}"
)


def build_prompt(text: str) -> str:
    """The generation-stage prompt for one input text."""
    return _PROMPT_TEMPLATE.format(text=text)


class AnswerKind(str, Enum):
    SUFFIX = "suffix"
    NONE = "none"
    UNPARSEABLE = "unparseable"


class AlignMethod(str, Enum):
    EXACT = "exact"
    FUZZY = "fuzzy"
    FALLBACK_LENGTH = "fallback_length"
    NONE_ANSWER = "none_answer"


@dataclass(frozen=True)
class ParsedAnswer:
    kind: AnswerKind
    suffix_words: tuple[str, ...] = ()


_ANSWER_MARKER = "answer"


def parse_answer(output: str) -> ParsedAnswer:
    """Classify a raw generation as suffix claim, none claim, or noise.

    The reply is expected to open with "Answer: ", but real decoder output
    drifts, so the marker is matched case-insensitively with loose
    whitespace and a missing marker falls back to reading the whole reply
    as the claimed suffix.  Never raises: anything with no usable words
    comes back as UNPARSEABLE.
    """
    body = output
    stripped = output.lstrip()
    lowered = stripped.lower()
    if lowered.startswith(_ANSWER_MARKER):
        rest = stripped[len(_ANSWER_MARKER):].lstrip()
        if rest.startswith(":"):
            body = rest[1:]
    remainder = body.strip()
    none_probe = remainder
    if none_probe.endswith("."):
        none_probe = none_probe[:-1]
    if none_probe.strip().casefold() == "none":
        return ParsedAnswer(kind=AnswerKind.NONE)
    words = tuple(word_strings(remainder))
    if not words:
        return ParsedAnswer(kind=AnswerKind.UNPARSEABLE)
    return ParsedAnswer(kind=AnswerKind.SUFFIX, suffix_words=words)


def _normalize_word(word: str) -> str:
    start = 0
    end = len(word)
    while start < end and unicodedata.category(word[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(word[end - 1]).startswith("P"):
        end -= 1
    return word[start:end].casefold()


@dataclass(frozen=True)
class SuffixAlignment:
    boundary: int
    method: AlignMethod
    score: float


def _fuzzy_score(normalized: list[str], norm_suffix: list[str], start: int) -> float:
    window = len(normalized) - start
    m = len(norm_suffix)
    matches = 0
    for j in range(min(m, window)):
        if normalized[start + j] == norm_suffix[j]:
            matches += 1
    return matches / max(m, window)


def align_suffix(words: list[str], suffix_words: list[str]) -> SuffixAlignment:
    """Locate a claimed machine suffix inside the original words.

    Tried in order: an empty claim means fully human; a verbatim tail
    match anchors exactly; otherwise every candidate start is scored by
    normalized word overlap against the claim and the best score wins if
    it reaches 0.5; failing that, the claim's length alone positions the
    boundary.  Normalization strips leading/trailing punctuation and case
    so the fuzzy route absorbs the decoder's cosmetic edits.

    Args:
        words: The original text's words, in order.
        suffix_words: The words of the claimed machine suffix.

    Returns:
        A :class:`SuffixAlignment` with the boundary word index in
        ``[0, len(words)]``, the route that produced it, and its score.
    """
    n = len(words)
    m = len(suffix_words)
    if m == 0:
        return SuffixAlignment(boundary=n, method=AlignMethod.NONE_ANSWER, score=1.0)
    if m <= n and words[n - m:] == list(suffix_words):
        return SuffixAlignment(boundary=n - m, method=AlignMethod.EXACT, score=1.0)
    normalized = [_normalize_word(w) for w in words]
    norm_suffix = [_normalize_word(w) for w in suffix_words]
    best_start = 0
    best_score = -1.0
    for start in range(n + 1):
        score = _fuzzy_score(normalized, norm_suffix, start)
        if score > best_score:
            best_score = score
            best_start = start
    if best_score >= 0.5:
        return SuffixAlignment(boundary=best_start, method=AlignMethod.FUZZY, score=best_score)
    fallback = min(max(n - m, 0), n)
    return SuffixAlignment(boundary=fallback, method=AlignMethod.FALLBACK_LENGTH, score=best_score)


def insert_break(text: str, boundary: int) -> str:
    """Insert the boundary marker before word ``boundary``.

    ``boundary == word count`` appends the marker after the text instead.
    The input must not already contain a standalone marker, otherwise a
    later strip could not tell the two apart.
    """
    words = tokenize_words(text)
    if not 0 <= boundary <= len(words):
        raise MarkerError(f"boundary {boundary} outside [0, {len(words)}]")
    for w in words:
        if text[w.start:w.end] == BREAK_TOKEN:
            raise MarkerError(f"text already contains a standalone {BREAK_TOKEN}")
    if boundary < len(words):
        at = words[boundary].start
        return text[:at] + BREAK_TOKEN + " " + text[at:]
    if text and text[-1].isspace():
        return text + BREAK_TOKEN
    return text + " " + BREAK_TOKEN


def strip_break(text: str) -> tuple[str, int]:
    """Remove the single boundary marker and report its word position.

    The marked text must contain exactly one standalone marker word.
    Returns the marker-free text rebuilt with single spaces, plus the
    word index the marker occupied (equal to the remaining word count if
    the marker was last).
    """
    words = tokenize_words(text)
    marker_indices = [w.index for w in words if text[w.start:w.end] == BREAK_TOKEN]
    if len(marker_indices) != 1:
        raise MarkerError(
            f"expected exactly one standalone {BREAK_TOKEN}, found {len(marker_indices)}"
        )
    marker = marker_indices[0]
    kept = [text[w.start:w.end] for w in words if w.index != marker]
    return " ".join(kept), marker
