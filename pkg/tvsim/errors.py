"""Exception hierarchy shared across the simulator.

Each error also derives from the closest builtin so callers that only know
about ValueError / ArithmeticError keep working.
"""

from __future__ import annotations


class TvsimError(Exception):
    """Base class for simulator errors."""


class DimensionError(TvsimError, ValueError):
    """Ambient dimension too small, or matrix shapes disagree."""


class DegenerateNormError(TvsimError, ArithmeticError):
    """The attention output h0 has (numerically) zero norm, so LN(h0) is undefined."""

    def __init__(
        self,
        message: str,
        *,
        epoch: int | None = None,
        sample_index: int | None = None,
    ) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.sample_index = sample_index

    def with_context(
        self,
        *,
        epoch: int | None = None,
        sample_index: int | None = None,
    ) -> "DegenerateNormError":
        base = str(self.args[0]) if self.args else "degenerate norm"
        return DegenerateNormError(
            base,
            epoch=self.epoch if epoch is None else epoch,
            sample_index=self.sample_index if sample_index is None else sample_index,
        )

    def __str__(self) -> str:
        base = str(self.args[0]) if self.args else "degenerate norm"
        parts = []
        if self.epoch is not None:
            parts.append(f"epoch={self.epoch}")
        if self.sample_index is not None:
            parts.append(f"sample_index={self.sample_index}")
        return f"{base} ({', '.join(parts)})" if parts else base


class ConfigError(TvsimError, ValueError):
    """Experiment config failed schema or constraint validation."""

    def __init__(self, message: str, *, fields: list[str] | None = None) -> None:
        super().__init__(message)
        self.fields = list(fields or [])


class CheckpointError(TvsimError, ValueError):
    """Checkpoint container could not be parsed or does not match expectations."""


class FlowConstraintError(TvsimError, ValueError):
    """Surrogate-flow parameters violate the admissibility conditions."""


class InfeasibleShiftError(TvsimError, ValueError):
    """Shifted-dictionary request cannot be realized in the ambient space."""


class InsufficientLogError(TvsimError, ValueError):
    """Training log too short for trajectory checks."""
