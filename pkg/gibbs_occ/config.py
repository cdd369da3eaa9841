import logging
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from gibbs_occ.errors import ConfigurationError

load_dotenv()

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Runtime configuration with validation."""

    model_config = SettingsConfigDict(
        env_prefix="GIBBS_OCC_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Parallelism
    threads: int = Field(default=4, description="Maximum Monte Carlo worker threads")

    # Exact arithmetic and enumeration caps
    exact_max_order: int = Field(default=64, description="Largest K allowed in exact-rational mode")
    oracle_max_compositions: int = Field(
        default=1_000_000, description="Largest composition count the enumeration oracle accepts"
    )
    partition_max_k: int = Field(default=40, description="Largest k for partition-enumeration checks")

    # Numerics
    series_rtol: float = Field(default=1e-14, description="Relative tolerance of truncated series")
    jump_tail_mass: float = Field(default=1e-12, description="Discarded tail mass of the jump pmf")
    max_jump_support: int = Field(default=1_000_000, description="Largest jump size tabulated for xi sampling")
    max_jumps: int = Field(default=10_000_000, description="Subordinator jump memory cap")
    mle_scan_cap: int = Field(default=10_000_000, description="Upper limit of the n-likelihood ratio scan")
    min_ess: float = Field(default=50.0, description="Minimum effective sample size of biased estimates")

    # Randomness
    default_seed: int = Field(default=0, description="Seed used when none is given")

    # Logging
    log_level: str = Field(default="WARNING", description="Console logging level")
    log_file: str = Field(default="logs/gibbs_occ.log", description="Log file path")
    log_max_mb: int = Field(default=10, description="Size at which the log file rotates, in MB")
    log_backups: int = Field(default=5, description="Rotated log files kept")

    # HTTP API
    api_host: str = Field(default="127.0.0.1", description="API bind host")
    api_port: int = Field(default=8000, description="API bind port")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v = v.upper()
        if v not in valid_levels:
            raise ValueError(f"LOG_LEVEL must be one of {valid_levels}")
        return v

    @field_validator(
        "threads", "exact_max_order", "oracle_max_compositions", "partition_max_k",
        "max_jump_support", "max_jumps", "mle_scan_cap", "log_max_mb", "log_backups",
    )
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("series_rtol", "jump_tail_mass")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        return v


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Get validated settings instance."""
    try:
        return Settings()
    except ValidationError as e:
        raise ConfigurationError(f"Configuration Error: {e}") from e


def ensure_directories(settings: Settings) -> None:
    """Create the log directory if it does not exist."""
    Path(settings.log_file).parent.mkdir(exist_ok=True, parents=True)


def validate_configuration() -> Settings:
    """Validate configuration on startup and report the effective values."""
    settings = get_settings()
    ensure_directories(settings)

    logger.info(f"Worker threads: {settings.threads}")
    logger.info(f"Exact mode cap: K <= {settings.exact_max_order}")
    logger.info(f"Oracle cap: {settings.oracle_max_compositions} compositions")
    logger.info(f"Default seed: {settings.default_seed}")
    logger.info(f"Log level: {settings.log_level}")
    return settings
