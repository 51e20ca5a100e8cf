"""Exception types and global numeric configuration."""

from __future__ import annotations

import os

# Absolute tolerance for probability vectors: sums within PROB_TOL of 1 are
# renormalized, anything worse is rejected.
PROB_TOL = 1e-12

DEFAULT_ENUMERATION_CAP = 10**6
DEFAULT_POLICY_CAP = 10**4

CAP_ENV_VAR = "CHAINCONC_CAP"


class ChainconcError(Exception):
    """Base class for all chainconc errors."""


class ValidationError(ChainconcError):
    """Malformed input: bad shapes, negative probabilities, bad row sums."""


class EnumerationCapError(ChainconcError):
    """A requested enumeration exceeds the configured joint-space cap."""


class NoMixError(ChainconcError):
    """The chain admits no mixing time within its horizon."""


class ConvergenceError(ChainconcError):
    """An iterative routine failed to converge within its iteration budget."""


def enumeration_cap(override: int | None = None) -> int:
    """Resolve the enumeration cap: explicit override, else env var, else default.

    Exceeding the cap is always an error, never a silent approximation.
    """
    if override is not None:
        return int(override)
    env = os.environ.get(CAP_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError(f"{CAP_ENV_VAR} must be an integer, got {env!r}") from exc
    return DEFAULT_ENUMERATION_CAP
