"""Shim configuration.

A :class:`ShimConfig` names the two checkpoints the server fronts, an
optional adapter overlay, and the serving limits.  Validation happens at
construction so a bad configuration never reaches model loading.
"""

from __future__ import annotations

from dataclasses import dataclass


class ShimError(Exception):
    """Base class for shim failures."""


class ShimConfigError(ShimError):
    """Invalid configuration value."""


class CheckpointError(ShimError):
    """A checkpoint or adapter could not be loaded."""


@dataclass(frozen=True)
class ShimConfig:
    """Server configuration.

    Attributes:
        generation_model: Model id or local path of the causal LM behind
            ``/v1/generate``.
        labeler_model: Model id or local path of the token classifier
            behind ``/v1/label_tokens``.
        adapter: Optional path to a weight overlay file (see
            :func:`model_shim.checkpoints.load_models`).
        device: torch device string, e.g. ``"cpu"`` or ``"cuda:0"``.
        max_sequence_length: Upper bound on model input length in
            tokens; the effective limit per endpoint is additionally
            capped by each checkpoint's position capacity.
        port: TCP port the server listens on.
    """

    generation_model: str
    labeler_model: str
    adapter: str | None = None
    device: str = "cpu"
    max_sequence_length: int = 1024
    port: int = 8700

    def __post_init__(self) -> None:
        if not self.generation_model:
            raise ShimConfigError("generation_model must be set")
        if not self.labeler_model:
            raise ShimConfigError("labeler_model must be set")
        if self.max_sequence_length < 16:
            raise ShimConfigError(
                f"max_sequence_length {self.max_sequence_length} is below the minimum of 16"
            )
        if not 0 < self.port < 65536:
            raise ShimConfigError(f"port {self.port} outside (0, 65536)")
