"""Exception hierarchy shared by all modules."""


class TimeMachineError(Exception):
    """Base class for errors raised by this package."""


class ModelError(TimeMachineError, ValueError):
    """A mutation model failed validation."""


class NonUniqueStationary(ModelError):
    pass


class NonConvergence(TimeMachineError):
    pass


class DegenerateStationary(ModelError):
    """A type present in a configuration has zero stationary mass."""


class CapacityExceeded(TimeMachineError):
    pass


class InvalidConfiguration(TimeMachineError, ValueError):
    pass


class InvalidEvent(TimeMachineError, ValueError):
    pass


class ImpossibleAncestry(TimeMachineError):
    """Every ancestral event has zero proposal weight."""


class IterationCap(TimeMachineError):
    pass


class SizeMismatch(TimeMachineError, ValueError):
    pass


class SingularSystem(TimeMachineError):
    pass


class EmptyInput(TimeMachineError, ValueError):
    pass


class ConfigError(TimeMachineError, ValueError):
    """Experiment configuration could not be parsed or validated."""
