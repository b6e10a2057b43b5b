"""Boundary detection for mixed human/machine text.

A staged pipeline locates the first machine-written word of a text: a
generation stage proposes the machine suffix, post-processing aligns it
back to a word index and plants a ``<BREAK>`` marker, token-labeling
stages refine the estimate, and per-stage predictions are averaged into
the final boundary.  Mean absolute error over word indices is the
evaluation metric throughout.
"""

from .align import LabelVector, TokenSpanLabel, token_labels_to_word_index, word_index_to_token_labels
from .corpus import (
    BoundarySpec,
    CorpusStats,
    MixedTextInstance,
    Vocabulary,
    WordSpan,
    corpus_stats,
    parse_jsonl,
    synthesize_corpus,
    tokenize_words,
    word_strings,
    write_jsonl,
)
from .decoder_post import (
    BREAK_TOKEN,
    AlignMethod,
    AnswerKind,
    ParsedAnswer,
    SuffixAlignment,
    align_suffix,
    build_prompt,
    insert_break,
    parse_answer,
    strip_break,
)
from .encoder_io import EncoderExample, make_training_examples, predict_boundary
from .ensemble import BoundaryPrediction, aggregate, parse_predictions_jsonl
from .errors import (
    BackendError,
    BackendExhaustedError,
    BackendPayloadError,
    BackendRequestError,
    ConfigError,
    CorpusFormatError,
    IdMismatchError,
    MarkerError,
    OffsetAttributionError,
    TextseamError,
)
from .metrics import EvalReport, InstanceScore, error_histogram, score
from .folds import FoldAssignment, cross_label_plan, split

__version__ = "0.1.0"

__all__ = [
    "AlignMethod",
    "AnswerKind",
    "BREAK_TOKEN",
    "BackendError",
    "BackendExhaustedError",
    "BackendPayloadError",
    "BackendRequestError",
    "BoundaryPrediction",
    "BoundarySpec",
    "ConfigError",
    "CorpusFormatError",
    "CorpusStats",
    "EncoderExample",
    "EvalReport",
    "FoldAssignment",
    "IdMismatchError",
    "InstanceScore",
    "LabelVector",
    "MarkerError",
    "MixedTextInstance",
    "OffsetAttributionError",
    "ParsedAnswer",
    "SuffixAlignment",
    "TextseamError",
    "TokenSpanLabel",
    "Vocabulary",
    "WordSpan",
    "aggregate",
    "align_suffix",
    "build_prompt",
    "corpus_stats",
    "cross_label_plan",
    "error_histogram",
    "insert_break",
    "make_training_examples",
    "parse_answer",
    "parse_jsonl",
    "parse_predictions_jsonl",
    "predict_boundary",
    "score",
    "split",
    "strip_break",
    "synthesize_corpus",
    "tokenize_words",
    "token_labels_to_word_index",
    "word_index_to_token_labels",
    "word_strings",
    "write_jsonl",
]
