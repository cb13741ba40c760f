import os
from functools import lru_cache
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    app_name: str = "corpuscle"
    log: Literal["error", "info", "debug"] = "info"

    # Worker pool; None means one worker per logical core
    threads: int | None = None

    # Quadrature defaults
    quad_nodes: int = 32
    sphere_polar: int = 24
    sphere_azimuth: int = 48
    radial_nodes: int = 10

    # Finite-difference stencil h = a * stencil_fraction
    stencil_fraction: float = 1.0 / 20.0

    # Trajectory bound check
    max_speed: float = 1e6
    max_acceleration: float = 1e8

    # Diagnostics at or below this absolute value count as converged
    noise_floor: float = 1e-12

    model_config = SettingsConfigDict(env_file=".env", env_prefix="CORPUSCLE_")

    def worker_count(self, override: int | None = None) -> int:
        return max(1, override or self.threads or os.cpu_count() or 1)


@lru_cache
def get_settings():
    return Settings()
