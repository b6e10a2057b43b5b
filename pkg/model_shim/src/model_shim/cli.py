"""Command line entry points: build tiny checkpoints, serve a pair."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .checkpoints import load_models, make_tiny_checkpoints
from .config import ShimConfig, ShimError


@click.group()
def main() -> None:
    """Inference server for the mixed-text boundary wire protocol."""


@main.command("make-tiny")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Output directory.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--hidden", type=int, default=32, show_default=True)
@click.option("--layers", type=int, default=2, show_default=True)
@click.option("--positions", type=int, default=512, show_default=True)
def make_tiny(out: Path, seed: int, hidden: int, layers: int, positions: int) -> None:
    """Write a random-weight generation/labeler checkpoint pair."""
    generation_dir, labeler_dir = make_tiny_checkpoints(
        out, seed=seed, hidden=hidden, layers=layers, positions=positions
    )
    click.echo(f"wrote generation checkpoint: {generation_dir}")
    click.echo(f"wrote labeler checkpoint: {labeler_dir}")


@main.command("serve")
@click.option("--generation", "generation_model", required=True, help="Causal LM id or path.")
@click.option("--labeler", "labeler_model", required=True, help="Token classifier id or path.")
@click.option("--adapter", default=None, help="Optional weight overlay file.")
@click.option("--device", default="cpu", show_default=True)
@click.option("--max-seq-len", "max_sequence_length", type=int, default=1024, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8700, show_default=True)
@click.option(
    "--auth-token",
    default=None,
    envvar="MODEL_SHIM_AUTH_TOKEN",
    help="Require this bearer token on every request.",
)
def serve(
    generation_model: str,
    labeler_model: str,
    adapter: str | None,
    device: str,
    max_sequence_length: int,
    host: str,
    port: int,
    auth_token: str | None,
) -> None:
    """Load the checkpoints and serve the wire protocol."""
    import uvicorn

    from .service import build_app

    try:
        config = ShimConfig(
            generation_model=generation_model,
            labeler_model=labeler_model,
            adapter=adapter,
            device=device,
            max_sequence_length=max_sequence_length,
            port=port,
        )
        models = load_models(config)
    except ShimError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    app = build_app(models, auth_token=auth_token)
    uvicorn.run(app, host=host, port=config.port, log_level="info")
