"""Exception types raised across the package."""

from __future__ import annotations


class InvariantViolation(ValueError):
    """A value failed one of its structural invariants."""

    def __init__(self, message: str, deviation: float | None = None):
        super().__init__(message)
        self.deviation = deviation


class CompletenessViolation(InvariantViolation):
    """Kraus operators do not satisfy sum_k A_k^dag A_k = 1."""


class NotCorrectable(RuntimeError):
    """No perfect recovery exists (or the construction could not be certified)."""


class InfeasibleEnsemble(ValueError):
    """Target ensemble does not average to the required marginal."""


class CertificationDiscrepancy(RuntimeError):
    """The independent correctability tests disagree beyond their tolerances."""
