"""Checkpoint construction and loading.

`make_tiny_checkpoints` writes a random-weight generation/labeling model
pair small enough for tests and smoke runs.  `load_models` brings any
compatible checkpoint pair onto a device and resolves the per-endpoint
token limits the service enforces.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import torch
from transformers import (
    AutoModelForCausalLM,
    AutoModelForTokenClassification,
    AutoTokenizer,
    BertConfig,
    BertForTokenClassification,
    GPT2Config,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
)
from transformers.utils import logging as hf_logging

from .config import CheckpointError, ShimConfig

# Closed word list for the tiny tokenizer.  Unknown words fall back to
# [UNK] with correct offsets, so coverage only shapes generation output,
# not labeling fidelity.
_TINY_WORDS = (
    "Answer:", "None", "<BREAK>",
    "the", "a", "and", "of", "on", "in", "we", "our", "that", "with",
    "results", "method", "tasks", "models", "work", "shows", "strong",
    "gains", "across", "settings", "two", "several", "report", "most",
    "gen-the", "gen-a", "gen-and", "gen-of", "gen-on", "gen-in",
    "gen-results", "gen-method", "gen-tasks", "gen-models", "gen-work",
    "gen-shows", "gen-strong", "gen-gains", "gen-across", "gen-settings",
)


def _build_tokenizer() -> PreTrainedTokenizerFast:
    from tokenizers import Tokenizer, models, pre_tokenizers

    vocab: dict[str, int] = {"[UNK]": 0, "[PAD]": 1, "[EOS]": 2}
    for word in _TINY_WORDS:
        vocab[word] = len(vocab)
    backend = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    backend.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    return PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        eos_token="[EOS]",
    )


def make_tiny_checkpoints(
    out_dir: str | Path,
    seed: int = 0,
    hidden: int = 32,
    layers: int = 2,
    positions: int = 512,
) -> tuple[Path, Path]:
    """Write a random-weight model pair under ``out_dir``.

    Returns the (generation, labeler) checkpoint directories.  Both
    carry the same whitespace word-level tokenizer, so character offsets
    in labeling responses land exactly on word boundaries.
    """
    hf_logging.disable_progress_bar()
    out = Path(out_dir)
    tokenizer = _build_tokenizer()
    vocab_size = tokenizer.vocab_size
    torch.manual_seed(seed)

    generation_dir = out / "generation"
    generation_config = GPT2Config(
        vocab_size=vocab_size,
        n_positions=positions,
        n_embd=hidden,
        n_layer=layers,
        n_head=2,
        bos_token_id=tokenizer.eos_token_id,
        eos_token_id=tokenizer.eos_token_id,
        pad_token_id=tokenizer.pad_token_id,
    )
    generator = GPT2LMHeadModel(generation_config)
    generator.save_pretrained(generation_dir)
    tokenizer.save_pretrained(generation_dir)

    labeler_dir = out / "labeler"
    labeler_config = BertConfig(
        vocab_size=vocab_size,
        hidden_size=hidden,
        num_hidden_layers=layers,
        num_attention_heads=2,
        intermediate_size=hidden * 2,
        max_position_embeddings=positions,
        num_labels=2,
        pad_token_id=tokenizer.pad_token_id,
    )
    labeler = BertForTokenClassification(labeler_config)
    labeler.save_pretrained(labeler_dir)
    tokenizer.save_pretrained(labeler_dir)
    return generation_dir, labeler_dir


@dataclass
class LoadedModels:
    """A checkpoint pair resident on a device, with resolved limits."""

    generator: torch.nn.Module
    generation_tokenizer: object
    generation_limit: int
    labeler: torch.nn.Module
    labeler_tokenizer: object
    labeler_limit: int
    device: str


def _position_capacity(model: torch.nn.Module) -> int:
    config = model.config
    for attribute in ("max_position_embeddings", "n_positions"):
        value = getattr(config, attribute, None)
        if isinstance(value, int) and value > 0:
            return value
    return 1 << 30


def _apply_overlay(model: torch.nn.Module, overlay: Mapping[str, torch.Tensor], role: str) -> None:
    missing, unexpected = model.load_state_dict(dict(overlay), strict=False)
    del missing  # an overlay never covers the full model
    if unexpected:
        raise CheckpointError(
            f"adapter overlay for {role} names unknown parameters: {sorted(unexpected)[:5]}"
        )


def load_models(config: ShimConfig) -> LoadedModels:
    """Load the configured checkpoint pair, applying any adapter overlay.

    The adapter file is a torch-saved mapping with optional keys
    ``"generation"`` and ``"labeler"``, each a partial state dict merged
    over the matching model.  Unknown parameter names are an error;
    parameters the overlay does not mention keep their checkpoint
    values.

    Raises:
        CheckpointError: if a checkpoint or the overlay cannot be loaded.
    """
    hf_logging.disable_progress_bar()
    try:
        generation_tokenizer = AutoTokenizer.from_pretrained(config.generation_model)
        generator = AutoModelForCausalLM.from_pretrained(config.generation_model)
        labeler_tokenizer = AutoTokenizer.from_pretrained(config.labeler_model)
        labeler = AutoModelForTokenClassification.from_pretrained(config.labeler_model)
    except Exception as exc:
        raise CheckpointError(f"cannot load checkpoints: {exc}") from exc
    if getattr(labeler.config, "num_labels", None) != 2:
        raise CheckpointError(
            f"labeler checkpoint has {labeler.config.num_labels} labels, the protocol needs 2"
        )

    if config.adapter is not None:
        try:
            overlay = torch.load(config.adapter, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise CheckpointError(f"cannot load adapter {config.adapter}: {exc}") from exc
        if not isinstance(overlay, dict):
            raise CheckpointError(f"adapter {config.adapter} is not a state mapping")
        if "generation" in overlay:
            _apply_overlay(generator, overlay["generation"], "generation")
        if "labeler" in overlay:
            _apply_overlay(labeler, overlay["labeler"], "labeler")

    generator = generator.to(config.device).eval()
    labeler = labeler.to(config.device).eval()
    return LoadedModels(
        generator=generator,
        generation_tokenizer=generation_tokenizer,
        generation_limit=min(config.max_sequence_length, _position_capacity(generator)),
        labeler=labeler,
        labeler_tokenizer=labeler_tokenizer,
        labeler_limit=min(config.max_sequence_length, _position_capacity(labeler)),
        device=config.device,
    )
