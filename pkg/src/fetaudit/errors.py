"""Exception hierarchy for the audit toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError
subclasses -> 3, everything else under AuditError -> 4.
"""
from __future__ import annotations


class AuditError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AuditError):
    """Invalid or incomplete configuration (bad flags, missing seed, ...)."""


class DataError(AuditError):
    """Base class for corpus / annotation / rule file problems."""


class ParseError(DataError):
    """A record could not be decoded; message names the offending line."""


class ValidationError(DataError):
    """A decoded record violates an invariant (duplicate id, bad label, ...)."""


class SpecError(DataError):
    """A synthetic-corpus spec is internally inconsistent."""


class StratificationError(ValidationError):
    """Fold count exceeds the case count of some charge."""


class ContractError(AuditError):
    """An external encoder adapter violated the encoder output contract."""


class PipelineError(AuditError):
    """An audit stage failed after configuration and data checks passed."""


class TrainingDivergedError(PipelineError):
    """Training produced a non-finite loss; carries the epoch index."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class EmptiedCaseError(PipelineError):
    """Removing an element left a case with no sentences."""
