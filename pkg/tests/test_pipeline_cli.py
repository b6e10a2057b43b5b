"""Pipeline and CLI tests: commands, artifacts, exit codes, accounting.

Most cases drive the click entry points in-process; one subprocess case
checks the installed console script.  Exit codes under test: 0 success,
2 input/config, 3 alignment/id, 4 backend exhaustion.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from textseam.cli import main
from textseam.config import load_config, parse_config
from textseam.corpus import parse_jsonl, synthesize_corpus, write_jsonl
from textseam.decoder_post import BREAK_TOKEN
from textseam.ensemble import parse_predictions_jsonl
from textseam.errors import ConfigError
from textseam.pipeline import run_pipeline

from stub_backend import StubBackendServer, free_port

CONFIG_DIR = Path(__file__).parent.parent / "configs"


@pytest.fixture()
def runner() -> CliRunner:
    return CliRunner()


def invoke(runner: CliRunner, *args: str):
    return runner.invoke(main, list(args), catch_exceptions=False)


def write_corpus(path: Path, seed: int = 13, count: int = 30) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(synthesize_corpus(seed, count, min_words=10, max_words=20), fh)


def read_labels(path: Path) -> dict:
    with path.open("r", encoding="utf-8") as fh:
        return {p.id: p.value for p in parse_predictions_jsonl(fh)}


def test_synth_is_byte_deterministic(tmp_path: Path, runner: CliRunner) -> None:
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        result = invoke(runner, "synth", "--seed", "5", "--count", "40", "--out", str(out))
        assert result.exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    assert (
        invoke(runner, "synth", "--seed", "6", "--count", "40", "--out", str(a)).exit_code == 0
    )
    assert a.read_bytes() != b.read_bytes()


def test_synth_rejects_zero_count_as_usage_error(tmp_path: Path, runner: CliRunner) -> None:
    result = invoke(runner, "synth", "--count", "0", "--out", str(tmp_path / "x.jsonl"))
    assert result.exit_code == 2


def test_synth_boundary_options(tmp_path: Path, runner: CliRunner) -> None:
    out = tmp_path / "c.jsonl"
    result = invoke(
        runner, "synth", "--count", "25", "--boundary-fixed", "1.0", "--out", str(out)
    )
    assert result.exit_code == 0
    for inst in parse_jsonl(out.read_text("utf-8")):
        assert inst.gold_boundary == inst.word_count()
    result = invoke(
        runner,
        "synth",
        "--count", "25",
        "--boundary-weights", "1,0,0,1",
        "--min-words", "30",
        "--out", str(out),
    )
    assert result.exit_code == 0
    for inst in parse_jsonl(out.read_text("utf-8")):
        rel = inst.gold_boundary / inst.word_count()
        assert rel < 0.25 or rel >= 0.75


def test_run_full_oracle_predictions_equal_golds(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    out_dir = tmp_path / "out"
    result = invoke(
        runner,
        "run",
        "--config", str(CONFIG_DIR / "setup2.toml"),
        "--input", str(corpus),
        "--out-dir", str(out_dir),
    )
    assert result.exit_code == 0
    golds = {i.id: i.gold_boundary for i in parse_jsonl(corpus.read_text("utf-8"))}
    preds = read_labels(out_dir / "predictions.jsonl")
    assert preds == {k: float(v) for k, v in golds.items()}
    # Final rows carry exactly id and label.
    first = json.loads((out_dir / "predictions.jsonl").read_text("utf-8").split("\n")[0])
    assert set(first) == {"id", "label"}


def test_run_decoder_only_equals_decoder_boundaries(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, seed=17)
    out_dir = tmp_path / "out"
    result = invoke(
        runner,
        "run",
        "--config", str(CONFIG_DIR / "setup1.toml"),
        "--input", str(corpus),
        "--out-dir", str(out_dir),
    )
    assert result.exit_code == 0
    assert read_labels(out_dir / "predictions.jsonl") == read_labels(
        out_dir / "decoder_predictions.jsonl"
    )


def test_run_writes_stage_artifacts(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    out_dir = tmp_path / "out"
    invoke(
        runner,
        "run",
        "--config", str(CONFIG_DIR / "setup4.toml"),
        "--input", str(corpus),
        "--out-dir", str(out_dir),
    )
    for name in (
        "decoder_predictions.jsonl",
        "texts_with_break.jsonl",
        "encoder_encoder-1.jsonl",
        "encoder_encoder-2.jsonl",
        "predictions.jsonl",
        "failures.jsonl",
    ):
        assert (out_dir / name).is_file()
    marked = [
        json.loads(line)
        for line in (out_dir / "texts_with_break.jsonl").read_text("utf-8").splitlines()
    ]
    assert all(BREAK_TOKEN in row["text_with_break"] for row in marked)


def test_run_missing_input_exits_2_without_partial_outputs(
    tmp_path: Path, runner: CliRunner
) -> None:
    out_dir = tmp_path / "out"
    result = invoke(
        runner,
        "run",
        "--config", str(CONFIG_DIR / "setup1.toml"),
        "--input", str(tmp_path / "absent.jsonl"),
        "--out-dir", str(out_dir),
    )
    assert result.exit_code == 2
    assert not out_dir.exists()


def test_run_bad_config_exits_2(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "x"\n[pipeline]\nensemble = ["ghost"]\n', encoding="utf-8")
    result = invoke(
        runner,
        "run",
        "--config", str(bad),
        "--input", str(corpus),
        "--out-dir", str(tmp_path / "out"),
    )
    assert result.exit_code == 2


def test_unlabeled_corpus_with_oracle_stage_exits_2(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    rows = [{"id": 1, "text": "some words here"}, {"id": 2, "text": "more words"}]
    corpus.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    result = invoke(
        runner,
        "run",
        "--config", str(CONFIG_DIR / "setup1.toml"),
        "--input", str(corpus),
        "--out-dir", str(tmp_path / "out"),
    )
    assert result.exit_code == 2


def test_run_garbage_decoder_accounts_for_every_instance(
    tmp_path: Path, runner: CliRunner
) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, count=40)
    out_dir = tmp_path / "out"
    result = invoke(
        runner,
        "run",
        "--config", str(CONFIG_DIR / "setup5.toml"),
        "--input", str(corpus),
        "--out-dir", str(out_dir),
    )
    assert result.exit_code == 0
    preds = read_labels(out_dir / "predictions.jsonl")
    failures = (out_dir / "failures.jsonl").read_text("utf-8").strip()
    assert len(preds) == 40
    assert failures == ""
    methods = {
        json.loads(line).get("method")
        for line in (out_dir / "decoder_predictions.jsonl").read_text("utf-8").splitlines()
    }
    assert len(methods) >= 2  # junk exercises several alignment routes


def test_run_isolates_per_instance_backend_failures(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, count=4)
    with StubBackendServer() as server:
        # Sequential calls: second instance gets a non-retryable 422.
        server.enqueue({}, {"status": 422, "body": {"error": "rejected"}}, {}, {})
        config = tmp_path / "http.toml"
        config.write_text(
            "\n".join(
                [
                    'name = "http-run"',
                    "[decoder]",
                    'kind = "http-generation"',
                    f'base_url = "{server.base_url}"',
                    "retry_budget = 0",
                    "[pipeline]",
                    'ensemble = ["decoder"]',
                    "max_in_flight = 1",
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        out_dir = tmp_path / "out"
        result = invoke(
            runner,
            "run",
            "--config", str(config),
            "--input", str(corpus),
            "--out-dir", str(out_dir),
        )
        assert result.exit_code == 0
        preds = read_labels(out_dir / "predictions.jsonl")
        failure_rows = [
            json.loads(line)
            for line in (out_dir / "failures.jsonl").read_text("utf-8").splitlines()
        ]
        ids = [i.id for i in parse_jsonl(corpus.read_text("utf-8"))]
        assert len(preds) + len(failure_rows) == len(ids)
        assert [row["id"] for row in failure_rows] == [ids[1]]
        assert failure_rows[0]["stage"] == "decoder"


def test_run_exhausted_backend_exits_4(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, count=2)
    config = tmp_path / "http.toml"
    config.write_text(
        "\n".join(
            [
                'name = "unreachable"',
                "[decoder]",
                'kind = "http-generation"',
                f'base_url = "http://127.0.0.1:{free_port()}"',
                "retry_budget = 0",
                "timeout = 0.5",
                "[pipeline]",
                'ensemble = ["decoder"]',
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    result = invoke(
        runner,
        "run",
        "--config", str(config),
        "--input", str(corpus),
        "--out-dir", str(tmp_path / "out"),
    )
    assert result.exit_code == 4


def test_prepare_writes_folds_and_training_files(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "train.jsonl"
    write_corpus(corpus, count=31)
    out_dir = tmp_path / "prep"
    result = invoke(
        runner,
        "prepare",
        "--config", str(CONFIG_DIR / "setup2.toml"),
        "--train", str(corpus),
        "--out-dir", str(out_dir),
    )
    assert result.exit_code == 0
    folds = json.loads((out_dir / "folds.json").read_text("utf-8"))
    assert folds["k"] == 2
    assigned = [instance_id for instance_id, _ in folds["assignment"]]
    ids = [i.id for i in parse_jsonl(corpus.read_text("utf-8"))]
    assert sorted(assigned) == sorted(ids)
    fold0 = read_labels(out_dir / "decoder_fold0.jsonl")
    fold1 = read_labels(out_dir / "decoder_fold1.jsonl")
    assert not set(fold0) & set(fold1)
    assert abs(len(fold0) - len(fold1)) <= 1
    merged = read_labels(out_dir / "decoder_predictions.jsonl")
    assert merged == {**fold0, **fold1}

    pred_only = (out_dir / "encoder_train_pred_only.jsonl").read_text("utf-8").splitlines()
    mixed = (out_dir / "encoder_train_mixed.jsonl").read_text("utf-8").splitlines()
    assert len(pred_only) == 31
    assert len(mixed) == 62  # N predictions + N source rows
    golds = {i.id: i.gold_boundary for i in parse_jsonl(corpus.read_text("utf-8"))}
    for line in pred_only:
        row = json.loads(line)
        assert set(row) == {"id", "text_with_break", "label"}
        assert BREAK_TOKEN in row["text_with_break"]
        # Oracle decoder chain: training labels stay gold everywhere.
        assert row["label"] == golds[row["id"]]
    for line in mixed[31:]:
        row = json.loads(line)
        assert BREAK_TOKEN not in row["text_with_break"]


def test_prepare_missing_train_exits_2_without_outputs(tmp_path: Path, runner: CliRunner) -> None:
    out_dir = tmp_path / "prep"
    result = invoke(
        runner,
        "prepare",
        "--config", str(CONFIG_DIR / "setup2.toml"),
        "--train", str(tmp_path / "absent.jsonl"),
        "--out-dir", str(out_dir),
    )
    assert result.exit_code == 2
    assert not out_dir.exists()


def test_prepare_without_decoder_exits_2(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "train.jsonl"
    write_corpus(corpus, count=8)
    result = invoke(
        runner,
        "prepare",
        "--config", str(CONFIG_DIR / "setup6.toml"),
        "--train", str(corpus),
        "--out-dir", str(tmp_path / "prep"),
    )
    assert result.exit_code == 2


def test_score_zero_and_fixed_mae(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "gold.jsonl"
    write_corpus(corpus, count=12)
    golds = parse_jsonl(corpus.read_text("utf-8"))
    preds = tmp_path / "preds.jsonl"
    rows = [{"id": i.id, "label": i.gold_boundary} for i in golds]
    preds.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    result = invoke(runner, "score", "--pred", str(preds), "--gold", str(corpus))
    assert result.exit_code == 0
    assert "MAE 0.0000" in result.output

    rows = [{"id": i.id, "label": min(i.gold_boundary + 2, i.word_count())} for i in golds]
    preds.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    report_dir = tmp_path / "report"
    result = invoke(
        runner,
        "score",
        "--pred", str(preds),
        "--gold", str(corpus),
        "--report-dir", str(report_dir),
    )
    assert result.exit_code == 0
    payload = json.loads((report_dir / "eval.json").read_text("utf-8"))
    assert payload["count"] == 12
    assert (report_dir / "eval.txt").read_text("utf-8").startswith("MAE")


def test_score_non_utf8_pred_file_exits_2(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "gold.jsonl"
    write_corpus(corpus, count=3)
    preds = tmp_path / "preds.jsonl"
    preds.write_bytes(b"\xc7\x00\xff junk")
    result = invoke(runner, "score", "--pred", str(preds), "--gold", str(corpus))
    assert result.exit_code == 2
    assert "error:" in result.output


def test_score_duplicate_or_mismatched_ids_exit_3(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "gold.jsonl"
    write_corpus(corpus, count=3)
    golds = parse_jsonl(corpus.read_text("utf-8"))
    preds = tmp_path / "preds.jsonl"
    rows = [{"id": golds[0].id, "label": 1}, {"id": golds[0].id, "label": 2}]
    preds.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    result = invoke(runner, "score", "--pred", str(preds), "--gold", str(corpus))
    assert result.exit_code == 3

    rows = [{"id": "stranger", "label": 1}]
    preds.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    result = invoke(runner, "score", "--pred", str(preds), "--gold", str(corpus))
    assert result.exit_code == 3
    assert "stranger" in result.output


def test_ensemble_command_averages_files(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, count=6)
    golds = parse_jsonl(corpus.read_text("utf-8"))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    rows_a = [{"id": i.id, "label": 2} for i in golds]
    rows_b = [{"id": i.id, "label": 5} for i in golds]
    a.write_text("\n".join(json.dumps(r) for r in rows_a) + "\n", encoding="utf-8")
    b.write_text("\n".join(json.dumps(r) for r in rows_b) + "\n", encoding="utf-8")
    out = tmp_path / "avg.jsonl"
    result = invoke(
        runner,
        "ensemble",
        "--inputs", str(a),
        "--inputs", str(b),
        "--corpus", str(corpus),
        "--out", str(out),
    )
    assert result.exit_code == 0
    assert set(read_labels(out).values()) == {4.0}  # mean 3.5 rounds away

    rows_b = rows_b[:-1]
    b.write_text("\n".join(json.dumps(r) for r in rows_b) + "\n", encoding="utf-8")
    result = invoke(
        runner,
        "ensemble",
        "--inputs", str(a),
        "--inputs", str(b),
        "--corpus", str(corpus),
        "--out", str(out),
    )
    assert result.exit_code == 3


def test_toml_and_json_configs_are_equivalent(tmp_path: Path, runner: CliRunner) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, count=10)
    json_config = tmp_path / "setup6.json"
    json_config.write_text(
        json.dumps(
            {
                "name": "setup6",
                "seed": 13,
                "encoders": [
                    {"name": "encoder-1", "kind": "noisy-oracle-labeler", "deviation": 1, "seed": 61}
                ],
                "pipeline": {"use_break_at_inference": False, "ensemble": ["encoder-1"]},
            }
        ),
        encoding="utf-8",
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    invoke(runner, "run", "--config", str(CONFIG_DIR / "setup6.toml"), "--input", str(corpus), "--out-dir", str(out_a))
    invoke(runner, "run", "--config", str(json_config), "--input", str(corpus), "--out-dir", str(out_b))
    assert (out_a / "predictions.jsonl").read_bytes() == (out_b / "predictions.jsonl").read_bytes()


def test_config_validation_rules() -> None:
    with pytest.raises(ConfigError):
        parse_config({"pipeline": {"ensemble": ["decoder"]}}, name="x")  # no stages
    with pytest.raises(ConfigError):
        parse_config(
            {"decoder": {"kind": "oracle-generation"}, "pipeline": {"ensemble": []}}, name="x"
        )
    with pytest.raises(ConfigError):
        parse_config(
            {
                "encoders": [{"kind": "oracle-labeler"}],
                "pipeline": {"use_break_at_inference": True, "ensemble": ["encoder-1"]},
            },
            name="x",
        )
    with pytest.raises(ConfigError):
        parse_config(
            {"decoder": {"kind": "warp-drive"}, "pipeline": {"ensemble": ["decoder"]}}, name="x"
        )
    config = parse_config(
        {"decoder": {"kind": "oracle-generation"}, "pipeline": {"ensemble": ["decoder"]}},
        name="fallback-name",
    )
    assert config.name == "fallback-name"


def test_load_config_reads_all_shipped_setups() -> None:
    for n in range(1, 8):
        config = load_config(CONFIG_DIR / f"setup{n}.toml")
        assert config.name == f"setup{n}"
        config.validate()


def test_shipped_setup_topologies_match_their_stages() -> None:
    # Dataflow fidelity: which stages exist, whether the marker is used,
    # and what feeds the final average.
    expectations = {
        1: (True, 0, False, ("decoder",)),
        2: (True, 1, True, ("encoder-1",)),
        3: (True, 1, True, ("encoder-1",)),
        4: (True, 2, True, ("encoder-1", "encoder-2")),
        5: (True, 0, False, ("decoder",)),
        6: (False, 1, False, ("encoder-1",)),
        7: (False, 1, False, ("encoder-1",)),
    }
    for n, (has_decoder, encoders, use_break, members) in expectations.items():
        config = load_config(CONFIG_DIR / f"setup{n}.toml")
        assert (config.decoder is not None) == has_decoder, f"setup{n}"
        assert len(config.encoders) == encoders, f"setup{n}"
        assert config.use_break_at_inference == use_break, f"setup{n}"
        assert config.ensemble_members == members, f"setup{n}"
    assert load_config(CONFIG_DIR / "setup3.toml").mix_source_in_training_data
    assert load_config(CONFIG_DIR / "setup5.toml").decoder.kind == "garbage-generation"


def test_run_pipeline_api_accounts_exactly_once(tmp_path: Path) -> None:
    instances = synthesize_corpus(23, 15, min_words=10, max_words=18)
    config = load_config(CONFIG_DIR / "setup4.toml")
    result = run_pipeline(config, instances, tmp_path / "out")
    assert len(result.predictions) + len(result.failures) == len(instances)
    assert [p.id for p in result.predictions] == [i.id for i in instances]


def test_console_script_is_installed() -> None:
    completed = subprocess.run(
        ["textseam", "--help"], capture_output=True, text=True, timeout=60
    )
    assert completed.returncode == 0
    assert "synth" in completed.stdout
    assert sys.version_info >= (3, 10)
