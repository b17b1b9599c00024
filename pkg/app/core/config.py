import logging
import sys
from pathlib import Path
from typing import Mapping, Optional

from app.core.logging import InterceptHandler
from loguru import logger
from starlette.config import Config

config = Config(".env")


PROJECT_NAME: str = config("PROJECT_NAME", default="ot-purify")
VERSION = "0.1.0"
DEBUG: bool = config("DEBUG", cast=bool, default=False)

# Optimal transport defaults
DEFAULT_EPSILON: float = config("DEFAULT_EPSILON", cast=float, default=0.05)
DEFAULT_TOLERANCE: float = config("DEFAULT_TOLERANCE", cast=float, default=1e-9)
DEFAULT_MAX_ITERS: int = config("DEFAULT_MAX_ITERS", cast=int, default=10_000)
DEFAULT_OT_TEMPERATURE: float = config(
    "DEFAULT_OT_TEMPERATURE", cast=float, default=1.0
)
# log-domain scaling switches on below this epsilon when not set explicitly
LOG_DOMAIN_THRESHOLD: float = 0.01

# Training defaults
DEFAULT_LOGIT_SCALE: float = config("DEFAULT_LOGIT_SCALE", cast=float, default=100.0)
DEFAULT_LEARNING_RATE: float = config(
    "DEFAULT_LEARNING_RATE", cast=float, default=0.002
)
DEFAULT_EPOCHS: int = config("DEFAULT_EPOCHS", cast=int, default=50)
DEFAULT_GCE_Q: float = 0.7

# Parallel drivers (theorem suite, sweeps)
N_JOBS: int = config("N_JOBS", cast=int, default=1)

MANIFEST_SCHEMA_VERSION = 2
RNG_ALGORITHM = "numpy.random.Philox"


def load_experiment_settings(
    path: Optional[str | Path], overrides: Optional[Mapping[str, str]] = None
) -> dict[str, str]:
    """Read a KEY=VALUE experiment file; ``overrides`` (from CLI flags) win over it.

    Keys are returned lower-cased so they can be fed to ``ExperimentConfig``.
    """
    environ = {key.upper(): str(value) for key, value in (overrides or {}).items()}
    file_values: dict[str, str] = {}
    if path is not None:
        if not Path(path).is_file():
            raise FileNotFoundError(f"Experiment config not found: {path}")
        experiment_config = Config(str(path), environ=environ)
        file_values = dict(experiment_config.file_values)
    merged = {**file_values, **environ}
    return {key.lower(): value for key, value in merged.items()}


# logging configuration
LOGGING_LEVEL = logging.DEBUG if DEBUG else logging.INFO
logging.basicConfig(
    handlers=[InterceptHandler(level=LOGGING_LEVEL)], level=LOGGING_LEVEL
)
logger.configure(handlers=[{"sink": sys.stderr, "level": LOGGING_LEVEL}])
