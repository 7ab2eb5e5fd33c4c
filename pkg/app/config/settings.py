# app/config/settings.py
from pydantic_settings import BaseSettings

from typing import Literal


class Settings(BaseSettings):
    # Seed local region (time x frequency samples) and hops
    LSF_N: int = 30
    LSF_M: int = 30
    LSF_DELTA_T: int = 5
    LSF_DELTA_F: int = 5

    # DPSS tapers: half-bandwidth products and counts per dimension
    TAPER_A_T: float = 2.0
    TAPER_A_F: float = 2.5
    TAPERS_T: int = 2
    TAPERS_F: int = 2

    # Noise handling
    NOISE_MARGIN_DB: float = 10.0
    NOISE_GUARD_FRACTION: float = 0.25
    ESTIMATE_NOISE_FLOOR: bool = True

    # Stationarity
    GAMMA_THRESHOLD: float = 0.9

    # Doppler mask (NLOS synthesis)
    MASK_BLOCK_LEN: int = 512

    # Synthesis
    SOS_SINUSOIDS: int = 64

    # Record format
    RECORD_FORMAT_VERSION: int = 1

    # Execution
    WORKERS: int = 1
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    model_config = {"env_file": ".env"}


settings = Settings()
