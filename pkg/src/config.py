"""Runtime configuration loaded from the environment."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

from dotenv import load_dotenv

DEFAULT_TOL = 1e-9
DEFAULT_AUDIT_TOL = 1e-12
DEFAULT_GRID_SIZE = 101
DEFAULT_LOG_LEVEL = "WARNING"

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class BellGamesConfig:
    """Settings shared by the command-line front end."""

    tolerance: float = DEFAULT_TOL
    audit_tolerance: float = DEFAULT_AUDIT_TOL
    grid_size: int = DEFAULT_GRID_SIZE
    log_level: str = DEFAULT_LOG_LEVEL


def _read_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = float(raw)
    except ValueError as e:
        raise ValueError(f"Invalid value for {name}: {raw!r}") from e
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"Invalid value for {name}: must be a positive finite number")
    return value


def _read_int(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError as e:
        raise ValueError(f"Invalid value for {name}: {raw!r}") from e
    if value < minimum:
        raise ValueError(f"Invalid value for {name}: must be at least {minimum}")
    return value


def load_config() -> BellGamesConfig:
    """Load configuration from environment variables (and a `.env` file if present).

    Returns:
        Populated configuration; unset variables fall back to the defaults.

    Raises:
        ValueError: If a variable is set to an unparsable or out-of-range value
    """
    load_dotenv()

    log_level = os.getenv("BELLGAMES_LOG_LEVEL", DEFAULT_LOG_LEVEL).strip().upper()
    if log_level not in _LOG_LEVELS:
        raise ValueError(f"Invalid value for BELLGAMES_LOG_LEVEL: {log_level!r}")

    return BellGamesConfig(
        tolerance=_read_float("BELLGAMES_TOL", DEFAULT_TOL),
        audit_tolerance=_read_float("BELLGAMES_AUDIT_TOL", DEFAULT_AUDIT_TOL),
        grid_size=_read_int("BELLGAMES_GRID_SIZE", DEFAULT_GRID_SIZE, minimum=2),
        log_level=log_level,
    )
