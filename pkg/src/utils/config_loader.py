"""Configuration loader for settings YAML, environment overrides and experiment JSON."""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from src.errors import ConfigError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class CftpSettings:
    """Coupling-from-the-past limits."""

    scan_cap: int = 10**9
    horizon_cap: int = 2**30
    block_size: int = 4096


@dataclass
class ExactSettings:
    """Exact-analysis state-space caps and tolerances."""

    rational_cap_states: int = 64
    dense_cap_states: int = 2**12
    sparse_cap_states: int = 2**20
    tolerance: float = 1e-12
    max_iterations: int = 200_000


@dataclass
class BoundsSettings:
    """Big-number policy for the criterium checker."""

    exact_bit_cap: int = 2**20
    log_precision_bits: int = 256
    log_magnitude_bits: int = 8192


@dataclass
class EstimationSettings:
    """Monte-Carlo defaults."""

    confidence: float = 0.99
    replications: int = 10_000
    tail_max: int = 32


@dataclass
class RuntimeSettings:
    """Process-level settings."""

    workers: int = 0
    seed: int = 20240101
    results_db: str = "sqlite:///./results.db"
    out_dir: str = "out"


@dataclass
class AppSettings:
    """Aggregated settings."""

    cftp: CftpSettings = field(default_factory=CftpSettings)
    exact: ExactSettings = field(default_factory=ExactSettings)
    bounds: BoundsSettings = field(default_factory=BoundsSettings)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    runtime: RuntimeSettings = field(default_factory=RuntimeSettings)


def _section(settings: Dict[str, Any], name: str, cls):
    """Build a settings dataclass from a YAML section, ignoring unknown keys."""
    data = settings.get(name, {}) or {}
    known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
    unknown = set(data) - set(known)
    if unknown:
        logger.warning(f"Ignoring unknown keys in settings section '{name}': {sorted(unknown)}")
    return cls(**known)


class ConfigLoader:
    """Loads settings from YAML and environment, and experiment configs from JSON."""

    def __init__(self, config_dir: str = "config"):
        """
        Initialize config loader.

        Args:
            config_dir: Directory containing settings.yaml and experiments/
        """
        self.config_dir = Path(config_dir)
        load_dotenv()  # Load BKSIM_* variables from .env file

    def load_settings(self) -> AppSettings:
        """
        Load numeric settings, then apply BKSIM_* environment overrides.

        A missing settings.yaml is not an error: defaults apply.

        Returns:
            AppSettings instance

        Raises:
            ConfigError: If settings.yaml exists but cannot be parsed
        """
        settings_file = self.config_dir / "settings.yaml"
        settings: Dict[str, Any] = {}
        if settings_file.exists():
            try:
                with open(settings_file, "r") as f:
                    settings = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"Cannot parse {settings_file}: {e}") from e
        else:
            logger.debug(f"Settings file not found, using defaults: {settings_file}")

        app_settings = AppSettings(
            cftp=_section(settings, "cftp", CftpSettings),
            exact=_section(settings, "exact", ExactSettings),
            bounds=_section(settings, "bounds", BoundsSettings),
            estimation=_section(settings, "estimation", EstimationSettings),
            runtime=_section(settings, "runtime", RuntimeSettings),
        )

        seed = os.getenv("BKSIM_SEED")
        if seed is not None:
            app_settings.runtime.seed = self._int_env("BKSIM_SEED", seed)
        workers = os.getenv("BKSIM_WORKERS")
        if workers is not None:
            app_settings.runtime.workers = self._int_env("BKSIM_WORKERS", workers)
        results_db = os.getenv("BKSIM_RESULTS_DB")
        if results_db:
            app_settings.runtime.results_db = results_db

        return app_settings

    def load_experiment(self, path: str) -> Dict[str, Any]:
        """
        Load an experiment config document.

        Relative paths are tried as given, then under config_dir/experiments.

        Args:
            path: Path to a JSON config

        Returns:
            Parsed JSON document

        Raises:
            ConfigError: If the file is missing or not valid JSON
        """
        candidates = [Path(path), self.config_dir / "experiments" / path]
        for candidate in candidates:
            if candidate.exists():
                logger.info(f"Loading experiment config: {candidate}")
                try:
                    with open(candidate, "r") as f:
                        return json.load(f)
                except json.JSONDecodeError as e:
                    raise ConfigError(f"Invalid JSON in {candidate}: {e}") from e
        raise ConfigError(f"Experiment config not found: {path}")

    def list_experiments(self) -> List[Path]:
        """Bundled experiment configs, sorted by name."""
        experiments_dir = self.config_dir / "experiments"
        if not experiments_dir.exists():
            logger.warning(f"Experiments directory not found: {experiments_dir}")
            return []
        return sorted(experiments_dir.glob("*.json"))

    @staticmethod
    def _int_env(key: str, value: str) -> int:
        try:
            return int(value)
        except ValueError as e:
            raise ConfigError(f"Environment variable {key} must be an integer, got {value!r}") from e


def validate_settings(settings: AppSettings) -> List[str]:
    """
    Validate settings, collecting every problem.

    Args:
        settings: Settings to check

    Returns:
        List of error messages (empty when valid)
    """
    errors = []

    if settings.cftp.scan_cap <= 0:
        errors.append("cftp.scan_cap must be positive")
    if settings.cftp.horizon_cap <= 0:
        errors.append("cftp.horizon_cap must be positive")
    if settings.cftp.block_size <= 0:
        errors.append("cftp.block_size must be positive")

    if settings.exact.rational_cap_states > settings.exact.dense_cap_states:
        errors.append("exact.rational_cap_states must not exceed exact.dense_cap_states")
    if settings.exact.dense_cap_states > settings.exact.sparse_cap_states:
        errors.append("exact.dense_cap_states must not exceed exact.sparse_cap_states")
    if not 0 < settings.exact.tolerance < 1:
        errors.append("exact.tolerance must lie in (0, 1)")

    if settings.bounds.log_precision_bits < 128:
        errors.append("bounds.log_precision_bits must be at least 128")
    if settings.bounds.exact_bit_cap < 64:
        errors.append("bounds.exact_bit_cap must be at least 64")

    if not 0 < settings.estimation.confidence < 1:
        errors.append("estimation.confidence must lie in (0, 1)")

    if settings.runtime.workers < 0:
        errors.append("runtime.workers must be nonnegative (0 uses every core)")

    if errors:
        logger.error("Settings validation failed:")
        for error in errors:
            logger.error(f"  - {error}")
    return errors


def parse_model(model_cls, data: Dict[str, Any], what: str):
    """
    Validate a document against a pydantic model, mapping failures to ConfigError.

    Args:
        model_cls: Pydantic model class
        data: Raw document
        what: Human-readable name used in the error message

    Returns:
        Model instance
    """
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        problems = [
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        ]
        raise ConfigError(f"Invalid {what}", {"problems": problems}) from e


_default_settings: Optional[AppSettings] = None


def default_settings() -> AppSettings:
    """Process-wide settings, loaded lazily from ./config."""
    global _default_settings
    if _default_settings is None:
        _default_settings = ConfigLoader().load_settings()
    return _default_settings


def set_default_settings(settings: AppSettings) -> None:
    """Install settings loaded by the CLI as the process default."""
    global _default_settings
    _default_settings = settings
