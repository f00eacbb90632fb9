"""Exception hierarchy shared by all samplestab modules."""


class SampleStabError(Exception):
    """Base class for all library errors."""


class DomainError(SampleStabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ControlSetError(SampleStabError, ValueError):
    """A control value is not a member of the admissible control cone."""


class InvariantError(SampleStabError, ValueError):
    """A structured value violates one of its construction invariants."""


class ImpulsiveControlError(DomainError):
    """An extended control with w0 = 0 has no finite original-control image."""


class ProjectionError(DomainError):
    """Feedback projection is undefined (w0 = 0, or w = 0 meaning drift only)."""


class FeedbackError(SampleStabError, RuntimeError):
    """A feedback law failed to evaluate at a state where it was needed."""


class CertificationError(SampleStabError, RuntimeError):
    """No grid control achieves the required Lyapunov decrease."""

    def __init__(self, message, best_control=None, value=None, threshold=None):
        super().__init__(message)
        self.best_control = best_control
        self.value = value
        self.threshold = threshold


class StrictnessError(SampleStabError, ValueError):
    """A descent rate lacks the strict expansion beta(R, 0) > R."""


class DecayError(SampleStabError, RuntimeError):
    """A descent rate failed to decay below a required level in time."""


class WindowError(SampleStabError, LookupError):
    """A strip-indexed query fell outside the stored index window."""


class ConfigError(SampleStabError, ValueError):
    """A run configuration is malformed or contains unknown keys."""
