from __future__ import annotations
from pydantic_yaml import parse_yaml_raw_as
from pydantic import ValidationError
import yaml
import os

from core.exceptions import ConfigurationError, DataIOError
from core.schemas import GlobalConfig


def _get_config_file(env: str) -> str|None:
    """
    1. According to the environment variable, get the configuration file path.

    2. If the environment variable is not set, use the default configuration file path.

    3. If the configuration file does not exist, return None.
    """

    config_mapping = {
        "dev": "config.dev.yaml",
        "development": "config.dev.yaml",
        "prod": "config.prod.yaml",
        "production": "config.prod.yaml",
        "test": "config.test.yaml",
        "testing": "config.test.yaml",
    }
    config_path = config_mapping.get(env, "config.dev.yaml")
    # Resolve to absolute path if relative
    config_path = os.path.abspath(config_path)

    # Check file existence
    if os.path.exists(config_path) and os.path.isfile(config_path):
        return config_path
    else:
        return None

def _ensure_open_with_utf8(config_file: str) -> str:
    """
    Ensure the configuration file is opened with UTF-8 encoding.
    """
    with open(config_file, "r", encoding="utf-8") as f:
        return f.read()

def parse_config_text(text: str, source: str = "<memory>") -> GlobalConfig:
    """Parse YAML (or JSON, which YAML accepts) into a validated GlobalConfig."""
    if not text.strip():
        return GlobalConfig()
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Configuration file is not valid YAML/JSON: {source}") from e
    if document is None:
        return GlobalConfig()
    if not isinstance(document, dict):
        raise ConfigurationError(f"Configuration in {source} must be a mapping at the top level")
    try:
        return parse_yaml_raw_as(GlobalConfig, text)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration in {source}: {e.errors()[0].get('msg', e)}") from e

def load_config(config_path:str|None = None) -> GlobalConfig:
    """Load configuration from file or environment variables."""
    env = os.getenv("ENV", "dev").lower()
    config_file = config_path
    if config_file is None:
        config_file = _get_config_file(env)
    if config_file is None:
        # no file for this environment: fall back to schema defaults
        config = GlobalConfig()
        config.app.mode = env
        return config
    if not os.path.isfile(config_file):
        raise DataIOError(f"Configuration file not found: {config_file}", path=config_file)
    try:
        config_data = _ensure_open_with_utf8(config_file)
    except UnicodeDecodeError as e:
        raise ConfigurationError(f"Configuration file is not a valid UTF-8 encoded file: {config_file}") from e
    except OSError as e:
        raise DataIOError(f"Error loading configuration file: {e}", path=config_file) from e

    config = parse_config_text(config_data, source=config_file)
    config.app.mode = env
    return config

_global_config = None

def get_config() -> GlobalConfig:
    global _global_config
    if _global_config is None:
        _global_config = load_config()
    return _global_config

def set_config(config: GlobalConfig | None) -> None:
    """Replace (or clear) the cached global configuration."""
    global _global_config
    _global_config = config
