"""
Configuration management for qsing
"""

import copy
import json
import logging
import logging.config
from pathlib import Path
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Execution settings
    threads: int = 1

    # Numerical settings
    eigen_floor: float = 1e-12

    # Logging settings
    log_level: str = "INFO"
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="QSING_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @field_validator("threads")
    @classmethod
    def _positive_threads(cls, value: int) -> int:
        if value < 1:
            raise ValueError("threads must be at least 1")
        return value

    @field_validator("eigen_floor")
    @classmethod
    def _positive_floor(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("eigen_floor must be positive")
        return value

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in logging.getLevelNamesMapping():
            raise ValueError(f"Unknown log level: {value}")
        return level


def load_logging_config() -> dict:
    """Load logging configuration from JSON file"""
    config_path = Path(__file__).parent.parent / "logging_config.json"
    try:
        with open(config_path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logging.getLogger(__name__).warning(f"Error loading logging config: {e}")
        return {}


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Apply the packaged logging configuration.

    Args:
        level: Root level override (defaults to settings.log_level)
        log_file: Optional path for an additional DEBUG file handler
    """
    current = Settings()
    resolved = (level or current.log_level).upper()
    config = copy.deepcopy(logging_config)
    if not config:
        logging.basicConfig(level=resolved)
        return

    for logger_config in config["loggers"].values():
        logger_config["level"] = resolved
    log_file = log_file or current.log_file
    if log_file:
        config["handlers"]["file"] = {
            "level": "DEBUG",
            "formatter": "standard",
            "class": "logging.FileHandler",
            "filename": log_file,
            "mode": "a",
        }
        config["loggers"][""]["handlers"].append("file")
    logging.config.dictConfig(config)


settings = Settings()
logging_config = load_logging_config()
