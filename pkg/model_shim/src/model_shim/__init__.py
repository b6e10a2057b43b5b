"""Reference inference server for the mixed-text boundary wire protocol."""

from .checkpoints import LoadedModels, load_models, make_tiny_checkpoints
from .config import CheckpointError, ShimConfig, ShimConfigError, ShimError
from .service import build_app

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "LoadedModels",
    "ShimConfig",
    "ShimConfigError",
    "ShimError",
    "build_app",
    "load_models",
    "make_tiny_checkpoints",
    "__version__",
]
