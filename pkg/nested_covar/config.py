# nested_covar/config.py
import os

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "Nested CoVaR Engine"
    APP_VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Parallelism
    THREADS: int = 0  # 0 -> os.cpu_count()

    # Output
    OUTPUT_DIR: str = "results"
    DETERMINISTIC_OUTPUT: bool = False  # zero all timings so reruns are byte-identical

    # Simulation
    SCENARIO_BLOCK: int = 1024  # outer scenarios per counter-based RNG block
    INNER_CHUNK: int = 256  # scenarios per inner-simulation work unit

    # Smoothing
    KRR_MAX_SAMPLES: int = 20000  # O(m^3) fit, O(m^2) memory
    EVAL_CHUNK_ROWS: int = 2048  # row block for memory-based evaluation
    ARTIFACT_VERSION: int = 1

    # Heston quadrature
    HESTON_PHI_MAX: float = 200.0
    HESTON_ABS_TOL: float = 1e-8

    @field_validator("THREADS", "SCENARIO_BLOCK", "INNER_CHUNK", "KRR_MAX_SAMPLES", "EVAL_CHUNK_ROWS", mode="before")
    @classmethod
    def parse_int(cls, v):
        return int(v)

    @field_validator("DETERMINISTIC_OUTPUT", mode="before")
    @classmethod
    def parse_deterministic(cls, v):
        if isinstance(v, bool):
            return v
        return str(v).lower() in ("true", "1", "yes")

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def validate_log_level(cls, v):
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v = str(v).upper()
        if v not in valid_levels:
            raise ValueError(f"LOG_LEVEL must be one of {valid_levels}")
        return v

    @field_validator("SCENARIO_BLOCK", "INNER_CHUNK", "EVAL_CHUNK_ROWS")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("block sizes must be positive")
        return v

    @property
    def thread_cap(self) -> int:
        return self.THREADS if self.THREADS > 0 else (os.cpu_count() or 1)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="COVAR_",
        case_sensitive=True,
        extra="ignore",
    )


# Create settings instance
settings = Settings()
