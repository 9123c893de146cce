"""Exception hierarchy for bksim.

Library code raises these; only the CLI maps them to exit codes and an
error JSON document.
"""

from typing import Any, Dict, Optional


class BKSimError(Exception):
    """Base class for all bksim errors."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form of the error."""
        return {
            "error": self.kind,
            "type": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


# ============================================================================
# Configuration errors (exit 2)
# ============================================================================

class ConfigError(BKSimError):
    """Malformed or invalid configuration."""

    exit_code = 2
    kind = "config"


# ============================================================================
# Numeric errors (exit 3)
# ============================================================================

class NumericError(BKSimError):
    """A computation could not be carried out soundly."""

    exit_code = 3
    kind = "numeric"


class ScanOverflowError(NumericError):
    """A regeneration or coalescence scan exceeded its step cap."""

    kind = "scan_overflow"


class HorizonOverflowError(NumericError):
    """CFTP did not coalesce within the configured horizon cap."""

    kind = "horizon_overflow"


class StateSpaceCapError(NumericError):
    """Exact computation refused: too many states."""

    kind = "state_space_cap"


class UnrepresentableError(NumericError):
    """Value lies beyond what exact or log-space arithmetic can hold."""

    kind = "unrepresentable"


class IndeterminateComparisonError(NumericError):
    """Directed-rounding intervals overlap where a decided result is required."""

    kind = "indeterminate"


class CouplingInvariantError(NumericError):
    """A coupling invariant (sandwich, theta <= eta) failed during a run."""

    kind = "coupling_invariant"


# ============================================================================
# Precondition errors (exit 4)
# ============================================================================

class PreconditionError(BKSimError):
    """An operation was called outside its domain."""

    exit_code = 4
    kind = "precondition"


class ParameterError(PreconditionError):
    """Invalid parameter value (even order, alpha out of range, ...)."""

    kind = "parameter"


class ContextTooShortError(PreconditionError):
    """Context shorter than the kernel's Markov order."""

    kind = "context_too_short"


class DominationError(PreconditionError):
    """Kernel pair is not ordered pointwise."""

    kind = "domination"


class HypothesisError(PreconditionError):
    """A required inequality between weight sums does not hold."""

    kind = "hypothesis"


class MissingTailRuleError(PreconditionError):
    """No inductive tail rule is registered for the parameter family."""

    kind = "missing_tail_rule"
