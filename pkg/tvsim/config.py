"""
Process-level settings for the simulator.

Experiment hyperparameters live in JSON configs (see `tvsim.schema`). This
module only covers knobs that belong to the machine running the experiment
rather than to the experiment itself: worker threads, default output root,
log verbosity, progress bars, and a few evaluation defaults.

Values come from environment variables, optionally seeded from a `.env` file
in the working directory.

Environment variables (quick reference):

Execution:
- TVSIM_THREADS (default: 1): worker threads for per-sample gradients and evaluation.
- TVSIM_OUTPUT_ROOT (default: runs): parent directory for run folders when a
  config does not name `out_dir`.
- TVSIM_PROGRESS (default: true): show tqdm progress bars during training.

Logging:
- TVSIM_LOG_LEVEL (default: INFO): root log level applied by the CLI.

Evaluation defaults:
- TVSIM_EVAL_SIZE (default: 1000): held-out samples per test distribution.
- TVSIM_LOG_EVERY (default: 10): logging cadence in epochs.
- TVSIM_PROBE_NU (default: 5): common-token directions included in projection probes.
- TVSIM_FD_STEP (default: 1e-5): central-difference step for gradient checks.
"""
# tvsim/config.py
from __future__ import annotations

import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()


def _raw(name: str) -> str | None:
    """Stripped value of `name`, or None when unset or blank."""
    v = os.getenv(name)
    if v is None or not v.strip():
        return None
    return v.strip()


def _env_str(name: str, default: str) -> str:
    v = _raw(name)
    return default if v is None else v


def _env_int(name: str, default: int) -> int:
    v = _raw(name)
    if v is None:
        return default
    try:
        return int(v)
    except ValueError as e:
        raise ValueError(f"{name} must be an integer, got {v!r}") from e


def _env_float(name: str, default: float) -> float:
    v = _raw(name)
    if v is None:
        return default
    try:
        return float(v)
    except ValueError as e:
        raise ValueError(f"{name} must be a number, got {v!r}") from e


def _env_bool(name: str, default: bool) -> bool:
    v = _raw(name)
    if v is None:
        return default
    return v.lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class Settings:
    """Immutable snapshot of the environment-driven settings."""

    # --- Execution ---
    # Worker threads for the per-sample gradient map and held-out evaluation.
    THREADS: int = _env_int("TVSIM_THREADS", 1)
    # Parent directory for run folders when a config does not set out_dir.
    OUTPUT_ROOT: str = _env_str("TVSIM_OUTPUT_ROOT", "runs")
    # tqdm bar over training epochs.
    PROGRESS: bool = _env_bool("TVSIM_PROGRESS", True)

    # --- Logging ---
    LOG_LEVEL: str = _env_str("TVSIM_LOG_LEVEL", "INFO").upper()

    # --- Evaluation defaults (configs may override) ---
    # Held-out samples per test distribution, drawn once per run.
    EVAL_SIZE: int = _env_int("TVSIM_EVAL_SIZE", 1000)
    # Epochs between TrainLog rows.
    LOG_EVERY: int = _env_int("TVSIM_LOG_EVERY", 10)
    # Number of nu directions listed in projection tables.
    PROBE_NU: int = _env_int("TVSIM_PROBE_NU", 5)
    # Central-difference step used by gradient checks.
    FD_STEP: float = _env_float("TVSIM_FD_STEP", 1e-5)


SETTINGS = Settings()


def validate_settings(settings: Settings = SETTINGS) -> None:
    """
    Performs validation checks on the loaded settings.

    Raises:
        ValueError: If any of the settings have invalid values.
    """
    allowed_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
    if settings.LOG_LEVEL not in allowed_levels:
        raise ValueError(
            f"TVSIM_LOG_LEVEL must be one of {sorted(allowed_levels)}, "
            f"got {settings.LOG_LEVEL!r}"
        )
    if settings.THREADS <= 0:
        raise ValueError("TVSIM_THREADS must be > 0")
    if settings.EVAL_SIZE <= 0:
        raise ValueError("TVSIM_EVAL_SIZE must be > 0")
    if settings.LOG_EVERY <= 0:
        raise ValueError("TVSIM_LOG_EVERY must be > 0")
    if settings.PROBE_NU < 0:
        raise ValueError("TVSIM_PROBE_NU must be >= 0")
    if not settings.FD_STEP > 0:
        raise ValueError("TVSIM_FD_STEP must be > 0")
