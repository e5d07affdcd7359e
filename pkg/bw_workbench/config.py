"""
Run defaults read from the environment (.env supported)
"""
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

# Load environment variables from .env
load_dotenv()


def _int(name, default):
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{name} must be an integer, found '{value}'") from None


@dataclass(frozen=True)
class Settings:
    max_level: Optional[int] = None
    conserved_degree: int = 2
    coefficient_cap: int = 200
    seed: int = 0
    oracle_trials: int = 10
    log_level: str = "WARNING"


def load_settings():
    return Settings(
        max_level=_int("BW_MAX_LEVEL", None),
        conserved_degree=_int("BW_CONSERVED_DEGREE", 2),
        coefficient_cap=_int("BW_COEFFICIENT_CAP", 200),
        seed=_int("BW_SEED", 0),
        oracle_trials=_int("BW_ORACLE_TRIALS", 10),
        log_level=os.getenv("BW_LOG_LEVEL", "WARNING").upper(),
    )
