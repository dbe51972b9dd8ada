"""
Process-wide settings loaded from the environment (and an optional .env file).
"""
import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()

SOFTWARE_VERSION = "1.0.0"

# Desk-scale ensemble size; the full-size ensemble is opt-in.
DEFAULT_TRAJECTORIES = 300
FULL_SIZE_TRAJECTORIES = 3000


class Settings(BaseModel):
    threads: int = Field(default=1, ge=1)
    output_dir: str = "runs"
    log_level: str = "INFO"
    full_size: bool = False

    @property
    def default_trajectories(self) -> int:
        return FULL_SIZE_TRAJECTORIES if self.full_size else DEFAULT_TRAJECTORIES


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in {"1", "true", "yes", "on"}


def load_settings() -> Settings:
    """Build settings from CHEOM_* environment variables"""
    return Settings(
        threads=int(os.getenv("CHEOM_THREADS", "1")),
        output_dir=os.getenv("CHEOM_OUTPUT_DIR", "runs"),
        log_level=os.getenv("CHEOM_LOG_LEVEL", "INFO"),
        full_size=_env_flag("CHEOM_FULL_SIZE"),
    )


settings = load_settings()
