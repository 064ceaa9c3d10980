"""
Configuration management for foveal-iqa.

Supports loading tool-wide defaults from:
- .foveal-iqa.toml (TOML format)
- .foveal-iqa.yaml or .foveal-iqa.yml (YAML format, needs PyYAML)
- pyproject.toml under [tool.foveal-iqa] section

Dataset-specific settings live in the manifest; see ``manifest.py``.
"""

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

CONFIG_FILENAMES = (".foveal-iqa.toml", ".foveal-iqa.yaml", ".foveal-iqa.yml")
PYPROJECT_SECTION = "foveal-iqa"


def _all_metrics() -> List[str]:
    from .scoring import DEFAULT_METRICS

    return list(DEFAULT_METRICS)


@dataclass
class Config:
    """Run defaults that apply when neither the CLI nor the manifest sets them."""

    seed: int = 0
    jobs: int = 1
    metrics: List[str] = field(default_factory=_all_metrics)
    group_by: str = "image"
    max_value: Optional[float] = None  # None means derive from bit depth
    restarts: int = 8
    max_iterations: int = 2000
    tolerance: float = 1e-10
    out_dir: str = "foveal-iqa-out"

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        """Create config from dictionary, ignoring unknown keys."""
        valid_keys = {f.name for f in fields(cls)}
        filtered_data = {k.replace("-", "_"): v for k, v in data.items()}
        return cls(**{k: v for k, v in filtered_data.items() if k in valid_keys})


def load_toml_config(path: Path) -> Optional[Dict[str, Any]]:
    """Load a TOML config; for pyproject.toml only the [tool.foveal-iqa] table."""
    try:
        with open(path, "rb") as f:
            data: Dict[str, Any] = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        logger.warning("Could not load TOML config from %s: %s", path, e)
        return None

    if path.name == "pyproject.toml":
        tool_data = data.get("tool", {})
        if isinstance(tool_data, dict):
            return dict(tool_data.get(PYPROJECT_SECTION, {}) or {})
        return {}
    return dict(data)


def load_yaml_config(path: Path) -> Optional[Dict[str, Any]]:
    """Load a YAML config; returns None when PyYAML is missing or parsing fails."""
    try:
        import yaml  # type: ignore[import-untyped]
    except ImportError:
        logger.warning("PyYAML is not installed; ignoring %s", path)
        return None
    try:
        with open(path, encoding="utf-8") as f:
            result = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        logger.warning("Could not load YAML config from %s: %s", path, e)
        return None
    return dict(result) if isinstance(result, dict) else None


def find_config_file(start_path: Optional[Path] = None) -> Optional[Path]:
    """
    Search for a configuration file starting from start_path and moving up.
    Looks for (in order):
    1. .foveal-iqa.toml
    2. .foveal-iqa.yaml
    3. .foveal-iqa.yml
    4. pyproject.toml (with [tool.foveal-iqa] section)
    """
    current = (start_path or Path.cwd()).resolve()

    while True:
        for filename in CONFIG_FILENAMES:
            config_path = current / filename
            if config_path.exists():
                return config_path

        pyproject_path = current / "pyproject.toml"
        if pyproject_path.exists() and load_toml_config(pyproject_path):
            return pyproject_path

        parent = current.parent
        if parent == current:
            return None
        current = parent


def load_config(path: Optional[Path] = None) -> Config:
    """
    Load configuration from file or use defaults.

    Args:
        path: Optional path to config file. If None, searches for config automatically.

    Returns:
        Config object with settings
    """
    if path is None:
        path = find_config_file()
    if path is None:
        return Config()

    if path.suffix == ".toml":
        data = load_toml_config(path)
    elif path.suffix in (".yaml", ".yml"):
        data = load_yaml_config(path)
    else:
        logger.warning("Unknown config file format: %s", path)
        return Config()

    if data is None:
        return Config()

    try:
        config = Config.from_dict(data)
    except TypeError as e:
        logger.warning("Invalid config format in %s: %s", path, e)
        return Config()
    logger.debug("Loaded config from %s", path)
    return config
