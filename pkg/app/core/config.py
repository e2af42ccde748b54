# app/core/config.py

"""
Application configuration module.

This module defines the Settings class, which centralizes environment-based
configuration for the simulator. Values are loaded from environment variables
(prefix ``DSA_``) or from a ``.env`` file using Pydantic Settings, so every
runtime knob is typed and validated before any experiment starts.

Experiment parameters themselves (gossip matrix, problem, schedule, seeds)
live in versioned JSON files parsed by ``app.schemas.experiment_schema``;
the settings below only cover process-wide defaults.
"""

from typing import List
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Global settings loaded from environment variables.

    Attributes
    ----------
    ENVIRONMENT : str
        Name of the current runtime environment.

    LOG_LEVEL : str
        Root level for the ``app`` loggers.

    OUTPUT_DIR : str
        Base directory where run directories are created.

    DEFAULT_WORKERS : int
        Size of the replica worker pool; 0 means machine parallelism.

    MAX_HORIZON : int
        Upper cap on derived trapping horizons (iteration count).

    BOUNDEDNESS_CAP : float
        Norm above which a run is truncated and flagged as unbounded.

    CONSENSUS_TOLERANCE : float
        Disagreement threshold used by the consensus decay summary.

    MIN_CONDITIONED : int
        Minimum number of replicas that must satisfy the entry event
        before a trapping frequency is reported.

    CSV_DIGITS : int
        Significant digits written for floats in CSV output.

    REPORT_SCHEMA_VERSION : int
        Version stamped on every JSON report.

    CORS_ORIGINS : List[str]
        Allowed origins for the HTTP surface.
    """

    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"

    # ------------------------------------------------------------------
    # Output
    # ------------------------------------------------------------------
    OUTPUT_DIR: str = "runs"
    CSV_DIGITS: int = 17
    REPORT_SCHEMA_VERSION: int = 1

    # ------------------------------------------------------------------
    # Replica execution
    # ------------------------------------------------------------------
    DEFAULT_WORKERS: int = 0
    MAX_HORIZON: int = 200_000
    BOUNDEDNESS_CAP: float = 1e6

    # ------------------------------------------------------------------
    # Statistics
    # ------------------------------------------------------------------
    CONSENSUS_TOLERANCE: float = 1e-2
    MIN_CONDITIONED: int = 30

    # ------------------------------------------------------------------
    # CORS Configuration
    # ------------------------------------------------------------------
    CORS_ORIGINS: List[str] = Field(
        default_factory=list,
        description="List of allowed CORS origins."
    )

    # Settings configuration
    model_config = SettingsConfigDict(env_file=".env", env_prefix="DSA_")


# ----------------------------------------------------------------------
# Settings Singleton
# ----------------------------------------------------------------------
settings = Settings()
