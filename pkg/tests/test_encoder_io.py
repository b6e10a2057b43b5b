"""Labeling-stage I/O tests: training rows and boundary decoding.

Training assembly is checked by counting and by field; boundary
decoding is driven through the oracle labeler mock so the expected
answer is the gold label itself.
"""

from __future__ import annotations

import random

import pytest

from textseam.align import TokenSpanLabel
from textseam.backends import ConstantTokenLabeler, OracleTokenLabeler
from textseam.corpus import MixedTextInstance, synthesize_corpus
from textseam.decoder_post import BREAK_TOKEN, insert_break
from textseam.encoder_io import make_training_examples, predict_boundary
from textseam.errors import IdMismatchError


def sample_corpus(seed: int, count: int) -> list[MixedTextInstance]:
    return synthesize_corpus(seed, count, min_words=10, max_words=25)


def shifted_predictions(instances: list[MixedTextInstance], shift: int) -> dict:
    preds = {}
    for inst in instances:
        assert inst.gold_boundary is not None
        preds[inst.id] = min(max(inst.gold_boundary + shift, 0), inst.word_count())
    return preds


def test_training_rows_marker_at_prediction_label_stays_gold() -> None:
    instances = sample_corpus(1, 8)
    preds = shifted_predictions(instances, 2)
    rows = make_training_examples(instances, preds)
    assert len(rows) == len(instances)
    for inst, row in zip(instances, rows):
        assert row.id == inst.id
        assert row.has_break
        assert row.gold_boundary == inst.gold_boundary
        assert row.input_text == insert_break(inst.text, preds[inst.id])


def test_mix_source_doubles_rows_prediction_block_first() -> None:
    instances = sample_corpus(2, 5)
    preds = shifted_predictions(instances, -1)
    rows = make_training_examples(instances, preds, mix_source=True)
    assert len(rows) == 2 * len(instances)
    assert [r.id for r in rows] == [i.id for i in instances] * 2
    for row in rows[: len(instances)]:
        assert row.has_break
    for inst, row in zip(instances, rows[len(instances):]):
        assert not row.has_break
        assert BREAK_TOKEN not in row.input_text
        assert row.input_text == inst.text


def test_source_rows_can_carry_gold_marker() -> None:
    instances = sample_corpus(3, 4)
    preds = shifted_predictions(instances, 1)
    rows = make_training_examples(
        instances, preds, mix_source=True, source_with_gold_break=True
    )
    for inst, row in zip(instances, rows[len(instances):]):
        assert row.has_break
        assert inst.gold_boundary is not None
        assert row.input_text == insert_break(inst.text, inst.gold_boundary)


def test_training_rows_require_gold_and_predictions() -> None:
    instances = sample_corpus(4, 3)
    preds = shifted_predictions(instances, 0)
    with_missing = instances + [MixedTextInstance("extra", "a b c")]
    with pytest.raises(IdMismatchError) as err:
        make_training_examples(with_missing, {**preds, "extra": 0})
    assert err.value.offending_ids == ["extra"]
    del preds[instances[1].id]
    with pytest.raises(IdMismatchError) as err:
        make_training_examples(instances, preds)
    assert err.value.offending_ids == [instances[1].id]


def test_predict_boundary_recovers_gold_on_unmarked_text() -> None:
    instances = sample_corpus(5, 20)
    labeler = OracleTokenLabeler(instances, seed=9)
    for inst in instances:
        pred = predict_boundary(labeler, inst.id, inst.text)
        assert pred.value == float(inst.gold_boundary)
        assert pred.stage == labeler.name
        assert not pred.truncated


def test_predict_boundary_ignores_marker_wherever_it_sits() -> None:
    instances = sample_corpus(6, 12)
    labeler = OracleTokenLabeler(instances, seed=9)
    rng = random.Random(31)
    for inst in instances:
        marked_at = rng.randint(0, inst.word_count())
        marked = insert_break(inst.text, marked_at)
        pred = predict_boundary(labeler, inst.id, marked)
        assert pred.value == float(inst.gold_boundary)


def test_predict_boundary_result_counts_marker_free_words() -> None:
    inst = MixedTextInstance("one", "h1 h2 h3 m1 m2", gold_boundary=3)
    labeler = OracleTokenLabeler([inst])
    # Marker before the gold word: decoded index must shift back past it.
    pred = predict_boundary(labeler, "one", insert_break(inst.text, 1))
    assert pred.value == 3.0
    # Marker after the gold word: no shift needed.
    pred = predict_boundary(labeler, "one", insert_break(inst.text, 5))
    assert pred.value == 3.0


def test_predict_boundary_all_human_labels_word_count() -> None:
    inst = MixedTextInstance(7, "a b c d", gold_boundary=4)
    labeler = OracleTokenLabeler([inst])
    assert predict_boundary(labeler, 7, inst.text).value == 4.0
    constant = ConstantTokenLabeler(label=0)
    assert predict_boundary(constant, 7, inst.text).value == 4.0


def test_predict_boundary_all_machine_labels_zero() -> None:
    constant = ConstantTokenLabeler(label=1)
    assert predict_boundary(constant, 1, "a b c").value == 0.0
    # With a leading marker, the marker-free boundary is still zero.
    assert predict_boundary(constant, 1, f"{BREAK_TOKEN} a b c").value == 0.0


def test_predict_boundary_flags_truncation() -> None:
    class HalfLabeler:
        name = "half"

        def label_tokens(self, instance_id, text):
            cut = len(text) // 2
            return [TokenSpanLabel(0, max(cut, 1), 0)]

    pred = predict_boundary(HalfLabeler(), 1, "aaaa bbbb cccc dddd")
    assert pred.truncated
    assert pred.value == 4.0
