"""Toolkit configuration using Pydantic Settings."""
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator
from typing import Optional, List


class Settings(BaseSettings):
    """Process-wide settings with environment variable support (GSGW_ prefix)."""

    APP_NAME: str = "gsgw"

    # Parallelism
    THREADS: int = Field(default=1, ge=1, description="Worker cap for restarts, Dijkstra sources and pair batches")

    # Numerical guards
    NAIVE_LOSS_GUARD: int = Field(default=200, ge=1, description="Largest n*m accepted by the quartic GW oracle")
    BRUTE_FORCE_MAX_N: int = Field(default=8, ge=1, description="Largest n accepted by permutation enumeration")
    SOFTSORT_ROUNDS: int = Field(default=10, ge=0, description="Row/column normalization rounds of the soft sort")
    TIE_JITTER: float = Field(default=1e-9, ge=0.0, description="Jitter added to scores during training")

    # Runs
    DEFAULT_SEEDS: List[int] = Field(default=[42, 7, 77], description="Seeds used when a config lists none")

    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    LOG_FILE: Optional[str] = Field(default=None, description="Log file path")

    model_config = SettingsConfigDict(
        env_prefix="GSGW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    @field_validator('LOG_LEVEL')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate LOG_LEVEL is one of allowed values."""
        allowed_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if v.upper() not in allowed_levels:
            raise ValueError(f'LOG_LEVEL must be one of {allowed_levels}')
        return v.upper()

    @field_validator('DEFAULT_SEEDS')
    @classmethod
    def validate_seeds(cls, v: List[int]) -> List[int]:
        """Require at least one non-negative seed."""
        if not v:
            raise ValueError("DEFAULT_SEEDS must not be empty")
        if any(seed < 0 for seed in v):
            raise ValueError("seeds must be non-negative")
        return v

    @property
    def max_workers(self) -> int:
        """Thread pool size honoured by every parallel section."""
        return self.THREADS


settings = Settings()
