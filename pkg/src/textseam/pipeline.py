"""Stage orchestration: inference runs and training-data preparation.

Stages execute sequentially; within a stage, backend calls fan out with
bounded concurrency.  Every stage's output lands on disk before the next
stage starts, so a long run can be inspected or re-driven stage by
stage.  An instance that fails a stage its final prediction depends on
moves to the failure report instead of the predictions file; every input
id ends up in exactly one of the two.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .backends import fan_out
from .config import DECODER_STAGE, PipelineConfig, build_generation_backend, build_labeler_backend
from .corpus import InstanceId, MixedTextInstance, word_strings, write_jsonl
from .decoder_post import (
    AlignMethod,
    AnswerKind,
    SuffixAlignment,
    align_suffix,
    build_prompt,
    insert_break,
    parse_answer,
)
from .encoder_io import make_training_examples, predict_boundary
from .ensemble import BoundaryPrediction, aggregate
from .errors import BackendExhaustedError, ConfigError
from .folds import FoldAssignment, save_assignment, split


@dataclass(frozen=True)
class StageFailure:
    id: InstanceId
    stage: str
    error: str
    exhausted: bool


@dataclass(frozen=True)
class RunResult:
    predictions: list[BoundaryPrediction]
    failures: list[StageFailure]
    artifacts: dict[str, Path]


@dataclass(frozen=True)
class PrepareResult:
    assignment: FoldAssignment
    artifacts: dict[str, Path]


def _write_lines(path: Path, rows: Sequence[Mapping[str, object]]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False))
            fh.write("\n")


def _write_predictions(path: Path, predictions: Sequence[BoundaryPrediction]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(predictions, fh)


def _decode_reply(text: str, raw_reply: str) -> SuffixAlignment:
    words = word_strings(text)
    parsed = parse_answer(raw_reply)
    if parsed.kind == AnswerKind.UNPARSEABLE:
        # Nothing usable in the reply: fall back to "no machine part",
        # scored 0 so it stays distinguishable from a genuine none answer.
        return SuffixAlignment(boundary=len(words), method=AlignMethod.NONE_ANSWER, score=0.0)
    return align_suffix(words, list(parsed.suffix_words))


def _run_decoder_stage(
    config: PipelineConfig,
    instances: Sequence[MixedTextInstance],
    out_dir: Path,
    failures: dict[InstanceId, StageFailure],
    artifacts: dict[str, Path],
) -> dict[InstanceId, BoundaryPrediction]:
    assert config.decoder is not None
    backend = build_generation_backend(config.decoder, config, instances)

    def call(inst: MixedTextInstance) -> BoundaryPrediction:
        reply = backend.generate(inst.id, build_prompt(inst.text), config.gen_params)
        alignment = _decode_reply(inst.text, reply)
        return BoundaryPrediction(
            id=inst.id,
            value=float(alignment.boundary),
            stage=DECODER_STAGE,
            method=alignment.method,
            score=alignment.score,
        )

    successes, failed = fan_out(instances, call, config.max_in_flight)
    for inst, error in failed:
        failures.setdefault(
            inst.id,
            StageFailure(inst.id, DECODER_STAGE, str(error), isinstance(error, BackendExhaustedError)),
        )
    path = out_dir / "decoder_predictions.jsonl"
    _write_predictions(path, successes)
    artifacts["decoder_predictions"] = path
    return {p.id: p for p in successes}


def _run_encoder_stage(
    config: PipelineConfig,
    spec_index: int,
    instances: Sequence[MixedTextInstance],
    texts: Mapping[InstanceId, str],
    out_dir: Path,
    failures: dict[InstanceId, StageFailure],
    artifacts: dict[str, Path],
) -> dict[InstanceId, BoundaryPrediction]:
    spec = config.encoders[spec_index]
    backend = build_labeler_backend(spec, config, instances)
    runnable = [inst for inst in instances if inst.id in texts]

    def call(inst: MixedTextInstance) -> BoundaryPrediction:
        return predict_boundary(backend, inst.id, texts[inst.id])

    successes, failed = fan_out(runnable, call, config.max_in_flight)
    required = spec.name in config.ensemble_members
    if required:
        for inst, error in failed:
            failures.setdefault(
                inst.id,
                StageFailure(inst.id, spec.name, str(error), isinstance(error, BackendExhaustedError)),
            )
    path = out_dir / f"encoder_{spec.name}.jsonl"
    _write_predictions(path, successes)
    artifacts[f"encoder_{spec.name}"] = path
    return {p.id: p for p in successes}


def run_pipeline(
    config: PipelineConfig,
    instances: Sequence[MixedTextInstance],
    out_dir: Path,
) -> RunResult:
    """Run the configured stages over a corpus and average the members.

    Args:
        config: Validated pipeline configuration.
        instances: Input corpus; gold labels are only needed when an
            oracle mock stage is configured.
        out_dir: Directory for all intermediate and final artifacts.

    Returns:
        A :class:`RunResult`; ``predictions`` and ``failures`` together
        cover every input instance exactly once.
    """
    config.validate()
    if config.needs_gold_at_inference() and any(i.gold_boundary is None for i in instances):
        raise ConfigError("an oracle stage is configured but the corpus has unlabeled instances")
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    failures: dict[InstanceId, StageFailure] = {}
    stage_preds: dict[str, dict[InstanceId, BoundaryPrediction]] = {}

    if config.decoder is not None:
        stage_preds[DECODER_STAGE] = _run_decoder_stage(
            config, instances, out_dir, failures, artifacts
        )

    if config.use_break_at_inference:
        decoder_preds = stage_preds[DECODER_STAGE]
        encoder_texts = {
            inst.id: insert_break(inst.text, int(decoder_preds[inst.id].value))
            for inst in instances
            if inst.id in decoder_preds
        }
        rows = [
            {"id": inst.id, "text_with_break": encoder_texts[inst.id]}
            for inst in instances
            if inst.id in encoder_texts
        ]
        path = out_dir / "texts_with_break.jsonl"
        _write_lines(path, rows)
        artifacts["texts_with_break"] = path
    else:
        encoder_texts = {inst.id: inst.text for inst in instances}

    for i, spec in enumerate(config.encoders):
        stage_preds[spec.name] = _run_encoder_stage(
            config, i, instances, encoder_texts, out_dir, failures, artifacts
        )

    word_counts = {inst.id: inst.word_count() for inst in instances}
    groups: dict[InstanceId, list[BoundaryPrediction]] = {}
    for inst in instances:
        if inst.id in failures:
            continue
        member_preds = []
        complete = True
        for member in config.ensemble_members:
            pred = stage_preds[member].get(inst.id)
            if pred is None:
                complete = False
                break
            member_preds.append(pred)
        if complete:
            groups[inst.id] = member_preds
    final = aggregate(groups, word_counts, rounding=config.rounding)
    # The final file carries only id and label, so diagnostics are dropped.
    bare = [BoundaryPrediction(id=p.id, value=p.value) for p in final]
    pred_path = out_dir / "predictions.jsonl"
    _write_predictions(pred_path, bare)
    artifacts["predictions"] = pred_path

    ordered_failures = [failures[inst.id] for inst in instances if inst.id in failures]
    fail_path = out_dir / "failures.jsonl"
    _write_lines(
        fail_path,
        [{"id": f.id, "stage": f.stage, "error": f.error} for f in ordered_failures],
    )
    artifacts["failures"] = fail_path

    assert len(final) + len(ordered_failures) == len(instances)
    return RunResult(predictions=bare, failures=ordered_failures, artifacts=artifacts)


def prepare_training(
    config: PipelineConfig,
    instances: Sequence[MixedTextInstance],
    out_dir: Path,
) -> PrepareResult:
    """Build fold files and labeling-stage training files.

    The generation stage labels each fold separately (with real
    backends, each fold's requests would target a model trained on the
    complement), the per-fold predictions are merged, and training rows
    pair marked texts with gold boundaries.

    Args:
        config: Validated configuration with a decoder stage.
        instances: Training corpus; every instance needs a gold label.
        out_dir: Directory for fold, prediction, and training artifacts.

    Returns:
        A :class:`PrepareResult` with the fold assignment and artifact
        paths.

    Raises:
        ConfigError: for a decoder-less config or unlabeled instances.
        BackendError: when any instance's generation fails; training
            files need every instance, so there is no partial success.
    """
    config.validate()
    if config.decoder is None:
        raise ConfigError("training preparation needs a decoder stage")
    unlabeled = sum(1 for i in instances if i.gold_boundary is None)
    if unlabeled:
        raise ConfigError(f"training corpus has {unlabeled} instances without gold labels")
    if not instances:
        raise ConfigError("training corpus is empty")

    assignment = split([i.id for i in instances], config.folds, config.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    folds_path = out_dir / "folds.json"
    with folds_path.open("w", encoding="utf-8", newline="\n") as fh:
        save_assignment(assignment, fh)
    artifacts["folds"] = folds_path

    backend = build_generation_backend(config.decoder, config, instances)

    def call(inst: MixedTextInstance) -> BoundaryPrediction:
        reply = backend.generate(inst.id, build_prompt(inst.text), config.gen_params)
        alignment = _decode_reply(inst.text, reply)
        return BoundaryPrediction(
            id=inst.id,
            value=float(alignment.boundary),
            stage=DECODER_STAGE,
            method=alignment.method,
            score=alignment.score,
        )

    all_preds: dict[InstanceId, BoundaryPrediction] = {}
    for fold in range(assignment.k):
        fold_ids = set(assignment.fold_ids(fold))
        fold_instances = [i for i in instances if i.id in fold_ids]
        successes, failed = fan_out(fold_instances, call, config.max_in_flight)
        if failed:
            _, first = failed[0]
            raise type(first)(
                f"generation failed on {len(failed)} of {len(fold_instances)} instances "
                f"in fold {fold}: {first}"
            )
        fold_path = out_dir / f"decoder_fold{fold}.jsonl"
        _write_predictions(fold_path, successes)
        artifacts[f"decoder_fold{fold}"] = fold_path
        all_preds.update({p.id: p for p in successes})

    merged = [all_preds[i.id] for i in instances]
    merged_path = out_dir / "decoder_predictions.jsonl"
    _write_predictions(merged_path, merged)
    artifacts["decoder_predictions"] = merged_path

    boundaries = {p.id: int(p.value) for p in all_preds.values()}
    for flavor, mix in (("pred_only", False), ("mixed", True)):
        examples = make_training_examples(
            instances,
            boundaries,
            mix_source=mix,
            source_with_gold_break=config.source_with_gold_break,
        )
        rows = [
            {"id": e.id, "text_with_break": e.input_text, "label": e.gold_boundary}
            for e in examples
        ]
        path = out_dir / f"encoder_train_{flavor}.jsonl"
        _write_lines(path, rows)
        artifacts[f"encoder_train_{flavor}"] = path

    return PrepareResult(assignment=assignment, artifacts=artifacts)
