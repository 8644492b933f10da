"""
Environment-driven configuration
"""

import os
from dataclasses import dataclass
from typing import Optional

from app.exceptions import ScenarioError

DEFAULT_FALSE_ALARM_PROBABILITY = 1e-4
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"{name} must be a number, got {raw!r}")


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{name} must be an integer, got {raw!r}")


@dataclass
class Config:
    log_level: str = 'INFO'
    log_format: str = 'text'
    log_file: Optional[str] = None
    output_dir: str = 'out'
    max_workers: int = 4
    default_p_fa: float = DEFAULT_FALSE_ALARM_PROBABILITY

    def __post_init__(self):
        self.log_level = self.log_level.upper()
        if self.log_level not in LOG_LEVELS:
            raise ScenarioError(f"RADAR_ALLOC_LOG_LEVEL must be one of {LOG_LEVELS}, got {self.log_level!r}")
        if self.log_format not in ('text', 'json'):
            raise ScenarioError(f"RADAR_ALLOC_LOG_FORMAT must be 'text' or 'json', got {self.log_format!r}")
        if self.max_workers < 1:
            raise ScenarioError(f"RADAR_ALLOC_MAX_WORKERS must be >= 1, got {self.max_workers}")
        if not 0.0 < self.default_p_fa < 1.0:
            raise ScenarioError(f"RADAR_ALLOC_DEFAULT_PFA must lie in (0, 1), got {self.default_p_fa}")

    @classmethod
    def from_env(cls) -> 'Config':
        """Build the configuration from RADAR_ALLOC_* environment variables"""
        return cls(
            log_level=os.getenv('RADAR_ALLOC_LOG_LEVEL', 'INFO'),
            log_format=os.getenv('RADAR_ALLOC_LOG_FORMAT', 'text').lower(),
            log_file=os.getenv('RADAR_ALLOC_LOG_FILE') or None,
            output_dir=os.getenv('RADAR_ALLOC_OUTPUT_DIR', 'out'),
            max_workers=_int_env('RADAR_ALLOC_MAX_WORKERS', 4),
            default_p_fa=_float_env('RADAR_ALLOC_DEFAULT_PFA', DEFAULT_FALSE_ALARM_PROBABILITY),
        )
