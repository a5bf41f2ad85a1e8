"""
Configuration utilities.

This module loads run settings from the environment (and an optional ``.env``
file) for all packages.
"""

import os
import logging
from dotenv import load_dotenv

from utils.error_handling import ValidationError

# Load environment variables
load_dotenv()

NUM_THREADS_VAR = 'HYPGCD_NUM_THREADS'
LOG_LEVEL_VAR = 'HYPGCD_LOG_LEVEL'
DEFAULT_SEED_VAR = 'HYPGCD_DEFAULT_SEED'

TOOLKIT_VERSION = '0.1.0'


class ConfigManager:
    """Reads toolkit settings from environment variables."""

    @staticmethod
    def get_num_threads() -> int:
        """
        Number of worker threads for the clustering engine.

        Returns:
            int: Value of HYPGCD_NUM_THREADS, or 1 when unset

        Raises:
            ValidationError: If the variable is not a positive integer
        """
        raw = os.getenv(NUM_THREADS_VAR)
        if raw is None or raw.strip() == '':
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ValidationError(f"{NUM_THREADS_VAR} must be an integer, got {raw!r}")
        if value < 1:
            raise ValidationError(f"{NUM_THREADS_VAR} must be >= 1, got {value}")
        return value

    @staticmethod
    def get_log_level() -> int:
        """
        Log level for CLI runs.

        Returns:
            int: The logging level named by HYPGCD_LOG_LEVEL (default INFO)

        Raises:
            ValidationError: If the name is not a logging level
        """
        name = os.getenv(LOG_LEVEL_VAR, 'INFO').upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            raise ValidationError(f"{LOG_LEVEL_VAR} is not a log level: {name!r}")
        return level

    @staticmethod
    def get_default_seed() -> int:
        """
        Seed used by CLI commands when --seed is omitted.

        Returns:
            int: Value of HYPGCD_DEFAULT_SEED, or 0 when unset

        Raises:
            ValidationError: If the variable is not a non-negative integer
        """
        raw = os.getenv(DEFAULT_SEED_VAR, '0')
        try:
            seed = int(raw)
        except ValueError:
            raise ValidationError(f"{DEFAULT_SEED_VAR} must be an integer, got {raw!r}")
        if seed < 0:
            raise ValidationError(f"{DEFAULT_SEED_VAR} must be non-negative, got {seed}")
        return seed
