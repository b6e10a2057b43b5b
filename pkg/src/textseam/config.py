"""Declarative pipeline configuration: one TOML or JSON document per setup.

A config names the stages (one optional generation stage called
"decoder", any number of labeling stages), flags controlling marker use
and training-data mixing, and which stages' predictions feed the final
average.  Stage kinds cover the in-process mocks and the HTTP clients,
so the same document shape drives tests and real deployments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import tomli

from .backends import (
    BackendEndpoint,
    ConstantTokenLabeler,
    GarbageGenerationBackend,
    GenParams,
    GenerationBackend,
    HttpGenerationBackend,
    HttpTokenLabeler,
    NoisyOracleTokenLabeler,
    OracleGenerationBackend,
    OracleTokenLabeler,
)
from .corpus import MixedTextInstance
from .encoder_io import TokenLabeler
from .errors import ConfigError

DECODER_STAGE = "decoder"

_GENERATION_KINDS = ("oracle-generation", "garbage-generation", "http-generation")
_LABELER_KINDS = (
    "oracle-labeler",
    "noisy-oracle-labeler",
    "constant-labeler",
    "http-labeler",
)
_ORACLE_KINDS = ("oracle-generation", "oracle-labeler", "noisy-oracle-labeler")


@dataclass(frozen=True)
class StageSpec:
    """One configured stage: its name, kind, and kind-specific options."""

    name: str
    kind: str
    options: Mapping[str, object] = field(default_factory=dict)

    def needs_gold(self) -> bool:
        return self.kind in _ORACLE_KINDS


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a setup needs: stages, flags, members, seeds."""

    name: str
    seed: int = 13
    decoder: StageSpec | None = None
    encoders: tuple[StageSpec, ...] = ()
    use_break_at_inference: bool = False
    mix_source_in_training_data: bool = False
    source_with_gold_break: bool = False
    ensemble_members: tuple[str, ...] = ()
    rounding: str = "half-away"
    folds: int = 2
    gen_params: GenParams = GenParams()
    max_in_flight: int = 4

    def validate(self) -> None:
        stage_names = [DECODER_STAGE] if self.decoder else []
        for enc in self.encoders:
            if enc.name in stage_names:
                raise ConfigError(f"duplicate stage name {enc.name!r}")
            stage_names.append(enc.name)
        if not stage_names:
            raise ConfigError("no stages configured")
        if self.decoder and self.decoder.kind not in _GENERATION_KINDS:
            raise ConfigError(
                f"decoder kind {self.decoder.kind!r} not one of {_GENERATION_KINDS}"
            )
        for enc in self.encoders:
            if enc.kind not in _LABELER_KINDS:
                raise ConfigError(f"encoder kind {enc.kind!r} not one of {_LABELER_KINDS}")
        if not self.ensemble_members:
            raise ConfigError("ensemble members must name at least one stage")
        for member in self.ensemble_members:
            if member not in stage_names:
                raise ConfigError(f"ensemble member {member!r} is not a configured stage")
        if len(set(self.ensemble_members)) != len(self.ensemble_members):
            raise ConfigError("ensemble members must be distinct")
        if self.use_break_at_inference and not self.decoder:
            raise ConfigError("use_break_at_inference requires a decoder stage")
        if self.folds < 2:
            raise ConfigError(f"folds {self.folds} < 2")
        if self.max_in_flight < 1:
            raise ConfigError(f"max_in_flight {self.max_in_flight} < 1")

    def needs_gold_at_inference(self) -> bool:
        stages = list(self.encoders)
        if self.decoder:
            stages.append(self.decoder)
        return any(s.needs_gold() for s in stages)


def _as_table(obj: object, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a table/object")
    return obj


def _opt(table: Mapping[str, object], key: str, kind: type, default):
    value = table.get(key, default)
    if value is default:
        return default
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if (isinstance(value, bool) and kind is not bool) or not isinstance(value, kind):
        raise ConfigError(f"config field {key!r} must be {kind.__name__}, got {value!r}")
    return value


def _parse_stage(table: Mapping[str, object], default_name: str) -> StageSpec:
    name = _opt(table, "name", str, default_name)
    kind = table.get("kind")
    if not isinstance(kind, str):
        raise ConfigError(f"stage {name!r} has no 'kind'")
    options = {k: v for k, v in table.items() if k not in ("name", "kind")}
    return StageSpec(name=name, kind=kind, options=options)


def parse_config(document: Mapping[str, object], name: str) -> PipelineConfig:
    """Build and validate a :class:`PipelineConfig` from a parsed document."""
    doc = dict(document)
    pipeline = _as_table(doc.get("pipeline", {}), "pipeline")
    decoder_table = doc.get("decoder")
    decoder = None
    gen_params = GenParams()
    if decoder_table is not None:
        decoder_table = _as_table(decoder_table, "decoder")
        decoder = _parse_stage(decoder_table, DECODER_STAGE)
        if decoder.name != DECODER_STAGE:
            raise ConfigError(f"the generation stage must be named {DECODER_STAGE!r}")
        gen_params = GenParams(
            temperature=_opt(decoder_table, "temperature", float, 1.0),
            top_p=_opt(decoder_table, "top_p", float, 1.0),
            max_new_tokens=_opt(decoder_table, "max_new_tokens", int, 512),
        )
    encoders = []
    raw_encoders = doc.get("encoders", [])
    if not isinstance(raw_encoders, list):
        raise ConfigError("'encoders' must be an array of tables")
    for i, table in enumerate(raw_encoders):
        encoders.append(_parse_stage(_as_table(table, f"encoders[{i}]"), f"encoder-{i + 1}"))
    members = pipeline.get("ensemble", [])
    if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
        raise ConfigError("'pipeline.ensemble' must be an array of stage names")
    config = PipelineConfig(
        name=_opt(doc, "name", str, name),
        seed=_opt(doc, "seed", int, 13),
        decoder=decoder,
        encoders=tuple(encoders),
        use_break_at_inference=_opt(pipeline, "use_break_at_inference", bool, False),
        mix_source_in_training_data=_opt(pipeline, "mix_source_in_training_data", bool, False),
        source_with_gold_break=_opt(pipeline, "source_with_gold_break", bool, False),
        ensemble_members=tuple(members),
        rounding=_opt(pipeline, "rounding", str, "half-away"),
        folds=_opt(pipeline, "folds", int, 2),
        gen_params=gen_params,
        max_in_flight=_opt(pipeline, "max_in_flight", int, 4),
    )
    config.validate()
    return config


def load_config(path: str | Path) -> PipelineConfig:
    """Load a config file; the extension picks the format (.toml or .json)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    if path.suffix == ".toml":
        with path.open("rb") as fh:
            try:
                document = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"unreadable TOML config {path}: {exc}") from exc
    elif path.suffix == ".json":
        try:
            document = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"unreadable JSON config {path}: {exc}") from exc
    else:
        raise ConfigError(f"config {path} must end in .toml or .json")
    if not isinstance(document, dict):
        raise ConfigError(f"config {path} must hold a single table/object")
    return parse_config(document, name=path.stem)


def _endpoint_from(spec: StageSpec) -> BackendEndpoint:
    opts = spec.options
    base_url = opts.get("base_url")
    if not isinstance(base_url, str) or not base_url:
        raise ConfigError(f"stage {spec.name!r} of kind {spec.kind!r} needs a base_url")
    return BackendEndpoint(
        base_url=base_url,
        timeout=_opt(opts, "timeout", float, 30.0),
        max_in_flight=_opt(opts, "max_in_flight", int, 4),
        retry_budget=_opt(opts, "retry_budget", int, 2),
        backoff_base=_opt(opts, "backoff_base", float, 0.25),
        auth_token=_opt(opts, "auth_token", str, None),
    )


def _require_gold(spec: StageSpec, instances: Sequence[MixedTextInstance]) -> None:
    if any(i.gold_boundary is None for i in instances):
        raise ConfigError(
            f"stage {spec.name!r} of kind {spec.kind!r} needs gold labels on every instance"
        )


def build_generation_backend(
    spec: StageSpec, config: PipelineConfig, instances: Sequence[MixedTextInstance]
) -> GenerationBackend:
    if spec.kind == "oracle-generation":
        _require_gold(spec, instances)
        return OracleGenerationBackend(instances, name=spec.name)
    if spec.kind == "garbage-generation":
        return GarbageGenerationBackend(
            seed=_opt(spec.options, "seed", int, config.seed), name=spec.name
        )
    if spec.kind == "http-generation":
        return HttpGenerationBackend(_endpoint_from(spec), name=spec.name)
    raise ConfigError(f"unknown generation kind {spec.kind!r}")


def build_labeler_backend(
    spec: StageSpec, config: PipelineConfig, instances: Sequence[MixedTextInstance]
) -> TokenLabeler:
    seed = _opt(spec.options, "seed", int, config.seed)
    if spec.kind == "oracle-labeler":
        _require_gold(spec, instances)
        return OracleTokenLabeler(instances, seed=seed, name=spec.name)
    if spec.kind == "noisy-oracle-labeler":
        _require_gold(spec, instances)
        deviation = spec.options.get("deviation")
        if not isinstance(deviation, int) or isinstance(deviation, bool):
            raise ConfigError(f"stage {spec.name!r} needs an integer 'deviation'")
        return NoisyOracleTokenLabeler(instances, deviation=deviation, seed=seed, name=spec.name)
    if spec.kind == "constant-labeler":
        label = spec.options.get("label")
        if not isinstance(label, int) or isinstance(label, bool):
            raise ConfigError(f"stage {spec.name!r} needs an integer 'label'")
        return ConstantTokenLabeler(label=label, name=spec.name)
    if spec.kind == "http-labeler":
        return HttpTokenLabeler(_endpoint_from(spec), name=spec.name)
    raise ConfigError(f"unknown labeler kind {spec.kind!r}")
