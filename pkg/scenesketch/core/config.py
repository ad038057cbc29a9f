"""
Process settings and run-config loading.

`Settings` holds values that come from the environment (weights root, device, logging).
`load_run_config` reads a TOML run file into a validated `RunConfig`, then applies
CLI overrides on top. Precedence: CLI flags > run file > model defaults.
"""
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from pydantic_settings import BaseSettings

from scenesketch.core.errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class Settings(BaseSettings):
    """Environment settings with type-safe configuration management."""

    # Pretrained weights (CLIP, U2-Net, LaMa) are resolved relative to this directory
    WEIGHTS_ROOT: Path = Path.home() / ".cache" / "scenesketch"
    ALLOW_DOWNLOAD: bool = True

    # Torch device for encoders and training
    DEVICE: str = "cpu"

    # Environment
    ENVIRONMENT: str = "development"
    LOG_LEVEL: Optional[str] = None
    LOG_FILE: Optional[str] = None

    class Config:
        env_file = ".env"
        env_prefix = "SCENESKETCH_"
        case_sensitive = True

    @property
    def log_level(self) -> str:
        """Explicit LOG_LEVEL wins, otherwise DEBUG in development."""
        if self.LOG_LEVEL:
            return self.LOG_LEVEL.upper()
        return "DEBUG" if self.ENVIRONMENT == "development" else "INFO"

    def weights_path(self, filename: str) -> Path:
        return self.WEIGHTS_ROOT / filename


# Create a single instance to be imported throughout the package
settings = Settings()


def _collect_errors(exc: ValidationError) -> List[str]:
    return [".".join(str(p) for p in err["loc"]) + f": {err['msg']}" for err in exc.errors()]


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        elif value is not None:
            merged[key] = value
    return merged


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None):
    """
    Build a RunConfig from an optional TOML file plus CLI overrides.

    Args:
        path: TOML file with [train], [encoder], [backends] and [output] sections
        overrides: nested dict of CLI values; None entries are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: unreadable file or any schema violation (lists offending keys)
    """
    from scenesketch.schemas import RunConfig

    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"Config file not found: {path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"Config file {path} is not valid TOML: {e}")

    merged = _deep_merge(raw, overrides or {})
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        problems = _collect_errors(e)
        raise ConfigurationError("Invalid run config: " + "; ".join(problems), keys=problems)
