"""Exception types shared across the package."""


class SemiwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(SemiwaveError):
    """Run configuration is invalid; carries the offending section/field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"[{field}] {message}")


class StepSizeUnderflow(SemiwaveError):
    """Adaptive integrator could not meet the tolerance with a finite step."""


class Cond1Drift(SemiwaveError):
    """Symplectic normalization residual of (A, B) exceeded its bound."""


class SingularA(SemiwaveError):
    """|det A| fell below threshold; frame cannot be evaluated."""


class FrameMismatch(SemiwaveError):
    """Coefficient vectors refer to different wavepacket frames."""


class UnsupportedOrder(SemiwaveError):
    """Requested Taylor order exceeds what the model can produce safely."""


class MissingDecayMetadata(SemiwaveError):
    """Operation requires short-range decay metadata that was not declared."""


class SupportOverflow(SemiwaveError):
    """Coefficient support would exceed the configured memory budget."""


class NotPResolved(SemiwaveError):
    """Hierarchy was integrated without the per-p split."""


class DegenerateProfile(SemiwaveError):
    """Layer-norm profile grows from the start; no asymptotic regime."""


class EmptyWindow(SemiwaveError):
    """No admissible decay rate between the growth and horizon constraints."""


class NoConvergence(SemiwaveError):
    """Asymptotic extraction did not settle (trapped orbit or bad data)."""


class GridTooCoarse(SemiwaveError):
    """Grid refinement changed the result by more than the allowed margin."""


class LeakageDetected(SemiwaveError):
    """Wavefunction mass reached the boundary of the periodic box."""
