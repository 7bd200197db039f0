"""
Validated experiment configuration.

Configs are JSON objects whose keys match the `TrainConfig` fields. The
experiment-level fields (output directory, plots, OOD list, threads) extend it
in `ExperimentConfig`. `load_experiment_config` turns pydantic validation
failures into a `ConfigError` that lists every offending field path.
"""
# tvsim/schema.py
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from tvsim.config import SETTINGS
from tvsim.errors import ConfigError

Dist = Literal["icl", "qa", "qa_icl"]
OODExperiment = Literal["dictionary_shift", "multi_concept", "demo_only", "arithmetic_transfer"]

MAX_J_STAR = 512


class TrainConfig(BaseModel):
    """Data, model and optimizer hyperparameters for one training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # --- concept space / data ---
    d: int = Field(..., ge=1)
    K: int = Field(..., ge=1)
    K_prime: int = Field(..., ge=0)
    M: int = Field(..., ge=1)
    J: int = Field(..., ge=1)
    J_test: int | None = Field(default=None, ge=1)
    N: int = Field(..., ge=1)
    x_a: float = Field(default=0.1, gt=0)
    sigma_p: float = Field(..., ge=0)
    sigma_p_test: float | None = Field(default=None, ge=0)

    # --- init / optimizer ---
    sigma0: float = Field(..., ge=0)
    sigma1: float = Field(..., ge=0)
    eta: float = Field(..., ge=0)
    q_V: float = Field(..., gt=0)
    lam: float = Field(default=0.0, ge=0)
    T: int = Field(..., ge=0)
    epsilon: float = Field(default=0.0, ge=0, le=1)
    seed: int = Field(default=0, ge=0)
    batch_mode: Literal["full", "minibatch"] = "full"
    batch_size: int | None = Field(default=None, ge=1)
    early_stopping: bool = False

    # --- distributions / evaluation ---
    train_dist: Dist
    test_dists: tuple[Dist, ...] = Field(default=("icl", "qa", "qa_icl"), min_length=1)
    log_every: int = Field(default_factory=lambda: SETTINGS.LOG_EVERY, ge=1)
    eval_size: int = Field(default_factory=lambda: SETTINGS.EVAL_SIZE, ge=1)
    probe_samples: int = Field(default=100, ge=1)

    # --- diagnostics ---
    delta: float = Field(default=0.01, gt=0, lt=1)
    condition_C: float = Field(default=1.0, gt=0)
    qa_ratio_max: float = Field(default=0.1, gt=0)
    icl_ratio_min: float = Field(default=0.3, gt=0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "TrainConfig":
        if 2 * self.K + self.K_prime > self.d:
            raise ValueError(f"2K+K_prime={2 * self.K + self.K_prime} exceeds d={self.d}")
        if len(set(self.test_dists)) != len(self.test_dists):
            raise ValueError(f"test_dists has duplicates: {list(self.test_dists)}")
        uses_nu = {"qa", "qa_icl"} & ({self.train_dist} | set(self.test_dists))
        if uses_nu and self.K_prime < 1:
            raise ValueError(f"K_prime must be >= 1 for distributions {sorted(uses_nu)}")
        if self.batch_mode == "minibatch":
            if self.batch_size is None:
                raise ValueError("batch_size is required when batch_mode='minibatch'")
            if self.batch_size > self.N:
                raise ValueError(f"batch_size={self.batch_size} exceeds N={self.N}")
        return self

    @property
    def sigma_p_star(self) -> float:
        return self.sigma_p if self.sigma_p_test is None else self.sigma_p_test

    @property
    def J_star(self) -> int:
        return self.J if self.J_test is None else self.J_test


class OODConfig(BaseModel):
    """Which out-of-distribution experiments to run after training, and their sizes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    experiments: tuple[OODExperiment, ...] = ()
    n_test: int = Field(default=1000, ge=1)
    seed_offset: int = Field(default=1000, ge=0)

    # dictionary shift
    shift_kind: Literal["icl", "qa_icl"] = "icl"
    a_weights: tuple[tuple[float, ...], ...] | None = None
    b_weights: tuple[tuple[float, ...], ...] = ()
    n_fresh_b: int | None = Field(default=None, ge=0)
    keep_original_nu: bool = False
    n_fresh_nu: int | None = Field(default=None, ge=0)

    # multi-concept prompts
    task_set: tuple[int, ...] | None = None
    J_star: int = Field(default=40, ge=1, le=MAX_J_STAR)
    n_multi: int = Field(default=200, ge=1)
    residual_max: float = Field(default=0.3, gt=0)

    # demo-only regression and arithmetic transfer
    demo_kind: Literal["icl", "qa_icl"] = "qa_icl"
    n_demo_only: int = Field(default=200, ge=1)
    n_transfer: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def _check_task_set(self) -> "OODConfig":
        if self.task_set is not None and not 1 <= len(self.task_set) <= 3:
            raise ValueError(f"task_set must hold 1 to 3 tasks, got {list(self.task_set)}")
        return self


class ExperimentConfig(TrainConfig):
    """A TrainConfig plus where and how to write artifacts."""

    out_dir: str | None = None
    plots: bool = True
    threads: int | None = Field(default=None, ge=1)
    ood: OODConfig = Field(default_factory=OODConfig)

    @model_validator(mode="after")
    def _check_ood_tasks(self) -> "ExperimentConfig":
        if self.ood.task_set is not None:
            bad = [k for k in self.ood.task_set if not 0 <= k < self.K]
            if bad:
                raise ValueError(f"ood.task_set entries {bad} outside 0..{self.K - 1}")
        if self.ood.a_weights is not None:
            for row in self.ood.a_weights:
                if len(row) != self.K:
                    raise ValueError(f"ood.a_weights rows need {self.K} entries, got {len(row)}")
        return self

    def resolved(self) -> dict[str, Any]:
        """Plain JSON-ready dict with every default filled in."""
        return self.model_dump(mode="json")


def _format_errors(exc: ValidationError) -> tuple[str, list[str]]:
    fields: list[str] = []
    lines: list[str] = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        fields.append(loc)
        lines.append(f"{loc}: {err.get('msg', 'invalid value')}")
    return "; ".join(lines), fields


def parse_experiment_config(
    payload: dict[str, Any],
    *,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    data = dict(payload)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        message, fields = _format_errors(exc)
        raise ConfigError(message, fields=fields) from exc


def load_experiment_config(
    path: str | Path,
    *,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
    return parse_experiment_config(raw, overrides=overrides)
