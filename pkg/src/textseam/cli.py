"""Command-line entry points.

Commands mirror the pipeline's lifecycle: ``synth`` makes test corpora,
``prepare`` builds fold and training files, ``run`` produces
predictions, ``score`` evaluates them, ``ensemble`` averages existing
prediction files.  Exit codes: 0 success, 2 input or config error, 3
alignment or id error, 4 backend exhaustion.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from .config import load_config
from .corpus import (
    BoundarySpec,
    MixedTextInstance,
    corpus_stats,
    parse_jsonl,
    synthesize_corpus,
    write_jsonl,
)
from .ensemble import BoundaryPrediction, aggregate, parse_predictions_jsonl
from .errors import (
    BackendError,
    BackendExhaustedError,
    BackendPayloadError,
    ConfigError,
    CorpusFormatError,
    IdMismatchError,
    MarkerError,
    OffsetAttributionError,
    TextseamError,
)
from .metrics import score as score_predictions
from .pipeline import prepare_training, run_pipeline

EXIT_INPUT = 2
EXIT_ALIGNMENT = 3
EXIT_BACKEND = 4


def _exit_code_for(error: Exception) -> int:
    if isinstance(error, BackendExhaustedError):
        return EXIT_BACKEND
    if isinstance(error, (MarkerError, OffsetAttributionError, IdMismatchError, BackendPayloadError)):
        return EXIT_ALIGNMENT
    if isinstance(error, BackendError):
        return EXIT_BACKEND
    return EXIT_INPUT


def _mapped_exit(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (TextseamError, OSError, UnicodeDecodeError) as exc:
            message = str(exc)
            if isinstance(exc, IdMismatchError) and exc.offending_ids:
                shown = ", ".join(repr(i) for i in exc.offending_ids[:20])
                message = f"{exc}: {shown}"
            click.echo(f"error: {message}", err=True)
            sys.exit(_exit_code_for(exc))

    return wrapper


@click.group()
def main() -> None:
    """Locate the first machine-written word in mixed texts."""


def _load_corpus(path: Path) -> list[MixedTextInstance]:
    if not path.is_file():
        raise ConfigError(f"input file {path} does not exist")
    with path.open("r", encoding="utf-8") as fh:
        return parse_jsonl(fh)


def _parse_weights(raw: str) -> tuple[float, ...]:
    try:
        weights = tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise click.BadParameter(f"weights {raw!r} must be comma-separated numbers")
    return weights


@main.command()
@click.option("--seed", type=int, default=13, show_default=True)
@click.option("--count", type=click.IntRange(min=1), required=True)
@click.option("--min-words", type=int, default=20, show_default=True)
@click.option("--max-words", type=int, default=60, show_default=True)
@click.option("--boundary-fixed", type=float, default=None, help="Fixed relative boundary in [0, 1].")
@click.option("--boundary-weights", type=str, default=None, help="Comma-separated bucket weights.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--stats/--no-stats", default=False, help="Print corpus histograms.")
@_mapped_exit
def synth(
    seed: int,
    count: int,
    min_words: int,
    max_words: int,
    boundary_fixed: float | None,
    boundary_weights: str | None,
    out: Path,
    stats: bool,
) -> None:
    """Generate a synthetic corpus with known boundaries."""
    if boundary_fixed is not None and boundary_weights is not None:
        raise click.BadParameter("--boundary-fixed and --boundary-weights are exclusive")
    if boundary_fixed is not None:
        boundary = BoundarySpec.fixed_at(boundary_fixed)
    elif boundary_weights is not None:
        boundary = BoundarySpec.bucketed(*_parse_weights(boundary_weights))
    else:
        boundary = BoundarySpec()
    try:
        instances = synthesize_corpus(
            seed, count, min_words=min_words, max_words=max_words, boundary=boundary
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(instances, fh)
    click.echo(f"wrote {len(instances)} instances to {out}")
    if stats:
        summary = corpus_stats(instances)
        click.echo(f"word counts: {summary.word_count_histogram}")
        click.echo(f"boundary buckets: {summary.boundary_position_histogram}")


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True)
@click.option("--train", "train_path", type=click.Path(path_type=Path), required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@_mapped_exit
def prepare(config_path: Path, train_path: Path, out_dir: Path) -> None:
    """Build fold files and labeling-stage training files."""
    config = load_config(config_path)
    instances = _load_corpus(train_path)
    result = prepare_training(config, instances, out_dir)
    sizes = result.assignment.sizes()
    click.echo(f"folds: {sizes} (seed {result.assignment.seed})")
    for name, path in sorted(result.artifacts.items()):
        click.echo(f"wrote {name}: {path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True)
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@_mapped_exit
def run(config_path: Path, input_path: Path, out_dir: Path) -> None:
    """Run the configured stages and write final predictions."""
    config = load_config(config_path)
    instances = _load_corpus(input_path)
    result = run_pipeline(config, instances, out_dir)
    click.echo(
        f"predicted {len(result.predictions)} of {len(instances)} instances"
        + (f", {len(result.failures)} failed" if result.failures else "")
    )
    if any(f.exhausted for f in result.failures):
        click.echo("error: backend retries exhausted; see failures.jsonl", err=True)
        sys.exit(EXIT_BACKEND)


@main.command()
@click.option("--pred", "pred_path", type=click.Path(path_type=Path), required=True)
@click.option("--gold", "gold_path", type=click.Path(path_type=Path), required=True)
@click.option("--report-dir", type=click.Path(path_type=Path), default=None)
@_mapped_exit
def score(pred_path: Path, gold_path: Path, report_dir: Path | None) -> None:
    """Score a predictions file against gold labels; prints the MAE."""
    if not pred_path.is_file():
        raise ConfigError(f"input file {pred_path} does not exist")
    golds = _load_corpus(gold_path)
    with pred_path.open("r", encoding="utf-8") as fh:
        predictions = parse_predictions_jsonl(fh)
    report = score_predictions(predictions, golds)
    if report_dir is not None:
        report_dir.mkdir(parents=True, exist_ok=True)
        (report_dir / "eval.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (report_dir / "eval.txt").write_text(report.to_table() + "\n", encoding="utf-8")
    click.echo(f"MAE {report.mae:.4f}")


@main.command()
@click.option(
    "--inputs",
    "input_paths",
    type=click.Path(path_type=Path),
    multiple=True,
    required=True,
    help="Per-stage prediction files, one per member.",
)
@click.option("--corpus", "corpus_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option(
    "--rounding",
    type=click.Choice(["half-away", "floor", "nearest-even"]),
    default="half-away",
    show_default=True,
)
@_mapped_exit
def ensemble(
    input_paths: tuple[Path, ...], corpus_path: Path, out: Path, rounding: str
) -> None:
    """Average existing prediction files into one predictions file."""
    instances = _load_corpus(corpus_path)
    word_counts = {i.id: i.word_count() for i in instances}
    per_file: list[dict] = []
    for path in input_paths:
        if not path.is_file():
            raise ConfigError(f"input file {path} does not exist")
        with path.open("r", encoding="utf-8") as fh:
            preds = parse_predictions_jsonl(fh)
        by_id = {p.id: p for p in preds}
        if len(by_id) != len(preds):
            raise IdMismatchError(f"duplicate ids in {path}")
        per_file.append(by_id)
    corpus_ids = [i.id for i in instances]
    for path, by_id in zip(input_paths, per_file):
        missing = [i for i in corpus_ids if i not in by_id]
        extra = [i for i in by_id if i not in set(corpus_ids)]
        if missing or extra:
            raise IdMismatchError(f"ids in {path} do not match the corpus", missing + extra)
    groups = {i: [by_id[i] for by_id in per_file] for i in corpus_ids}
    final = aggregate(groups, word_counts, rounding=rounding)
    bare = [BoundaryPrediction(id=p.id, value=p.value) for p in final]
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(bare, fh)
    click.echo(f"wrote {len(bare)} averaged predictions to {out}")


if __name__ == "__main__":
    main()
