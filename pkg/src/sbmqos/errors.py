"""Exception hierarchy shared by all modules."""


class SbmError(Exception):
    """Base class for toolkit errors."""


class ConfigError(SbmError, ValueError):
    """Invalid configuration value or missing key."""


class ShapeError(SbmError, ValueError):
    """Input sequences have incompatible lengths."""


class RangeError(SbmError, ValueError):
    """Argument outside a model's validity range."""


class InsufficientSamplesError(SbmError, ValueError):
    """Too few samples to form a trustworthy estimate."""

    def __init__(self, message: str, count: int):
        super().__init__(f"{message} (got {count})")
        self.count = count


class UnstableScenarioError(SbmError, ValueError):
    """The necessary-event process drifts upward, so the scenario is not stable."""


class NoBusyPeriodError(SbmError, ValueError):
    """Trace contains no busy period long enough to build a backlog martingale."""


class InfeasibleError(SbmError):
    """No decay parameter satisfies the steady-state condition."""

    def __init__(self, message: str, profile=None):
        super().__init__(message)
        self.profile = profile
