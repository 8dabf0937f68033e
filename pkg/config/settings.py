from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import field_validator
from typing import List

class Settings(BaseSettings):
    """
    Centralized configuration for the diverted-publication toolkit.
    Every service default (tolerances, iteration caps, pool sizes) is read from here;
    explicit function arguments always win.
    """
    # Core Metadata
    PROJECT_NAME: str = "Decoy Publication Toolkit"
    VERSION: str = "1.0.0"
    API_V1_STR: str = "/api/v1"
    LOG_LEVEL: str = "INFO"

    # Randomness
    DEFAULT_SEED: int = 42
    DEFAULT_L_PRIME: int = 5

    # Iterative reconstruction
    BAYES_TOL: float = 0.01
    BAYES_ABS_TOL: float = 0.005
    BAYES_SMALL_COMPONENT: float = 0.5
    BAYES_MAX_ITER: int = 10_000

    # Benchmark protocol
    POOL_SIZE: int = 5000
    POOL_MAX_ARITY: int = 3
    SMALL_COUNT_MAX: int = 10
    LAPLACE_QUERY_BUDGET: int = 100
    SELECTIVITY_THRESHOLDS: List[float] = [0.005, 0.01, 0.02, 0.03, 0.04, 0.05]

    # Guarantees
    EXACT_TAIL_MAX_N: int = 200

    # Allows p != 1/l' for mechanism a_prime (reproduces the p != q counterexamples only)
    UNSAFE_TEST_MODE: bool = False

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalise_log_level(cls, v: str) -> str:
        return str(v).upper() if v else "INFO"

    @field_validator("SELECTIVITY_THRESHOLDS")
    @classmethod
    def sort_thresholds(cls, v: List[float]) -> List[float]:
        if any(t <= 0 or t > 1 for t in v):
            raise ValueError("Selectivity thresholds must lie in (0, 1].")
        return sorted(v)

    @field_validator("BAYES_TOL", "BAYES_ABS_TOL", "BAYES_SMALL_COMPONENT")
    @classmethod
    def positive_tolerance(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("Tolerances must be positive.")
        return v

    model_config = SettingsConfigDict(
        env_file=".env",
        extra="ignore"
    )

settings = Settings()
