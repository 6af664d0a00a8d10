"""
utils/settings.py

Environment-driven defaults for the analysis toolkit.

Values are read from the process environment (optionally seeded from a .env
file) the same way for the CLI, the figure data generator and the tests.
"""

import os
from dataclasses import dataclass, replace

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Settings:
    """Tunable defaults shared across modules."""

    delta: float = 1e-3  # integrator regularization, rad/s
    hb_harmonics: int = 200
    hb_tail_tolerance: float = 1e-6
    phi_harmonics: int = 500
    period_tol: float = 1e-5
    jobs: int = 1
    log_level: str = "WARNING"
    output_dir: str = "./figure_data"

    def with_overrides(self, **overrides) -> "Settings":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)


def _read(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        raise ValueError(f"Invalid value for {name}: {raw!r} ({e})") from e


def load_settings() -> Settings:
    """
    Build Settings from SUBHARM_* environment variables.

    Raises:
        ValueError: If a variable is present but cannot be parsed or is out of range
    """
    defaults = Settings()
    settings = Settings(
        delta=_read("SUBHARM_DELTA", float, defaults.delta),
        hb_harmonics=_read("SUBHARM_HB_HARMONICS", int, defaults.hb_harmonics),
        hb_tail_tolerance=_read("SUBHARM_HB_TAIL_TOLERANCE", float, defaults.hb_tail_tolerance),
        phi_harmonics=_read("SUBHARM_PHI_HARMONICS", int, defaults.phi_harmonics),
        period_tol=_read("SUBHARM_PERIOD_TOL", float, defaults.period_tol),
        jobs=_read("SUBHARM_JOBS", int, defaults.jobs),
        log_level=_read("SUBHARM_LOG_LEVEL", str.upper, defaults.log_level),
        output_dir=_read("SUBHARM_OUTPUT_DIR", str, defaults.output_dir),
    )

    if settings.delta <= 0:
        raise ValueError("SUBHARM_DELTA must be positive")
    if settings.hb_harmonics < 1 or settings.phi_harmonics < 1:
        raise ValueError("SUBHARM_HB_HARMONICS and SUBHARM_PHI_HARMONICS must be >= 1")
    if settings.hb_tail_tolerance <= 0 or settings.period_tol <= 0:
        raise ValueError("SUBHARM_HB_TAIL_TOLERANCE and SUBHARM_PERIOD_TOL must be positive")
    if settings.jobs < 1:
        raise ValueError("SUBHARM_JOBS must be >= 1")
    if settings.log_level not in LOG_LEVELS:
        raise ValueError(f"SUBHARM_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")

    return settings
