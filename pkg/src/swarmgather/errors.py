"""Exception types shared across the package."""


class SwarmGatherError(Exception):
    """Base class for all package errors."""


class DegenerateBearingError(SwarmGatherError):
    """A bearing was requested between coincident points."""


class GenerationError(SwarmGatherError):
    """Constellation generation exhausted its retry budget."""


class ScenarioFormatError(SwarmGatherError):
    """A scenario file is malformed or has an unsupported version."""


class ContractViolationError(SwarmGatherError):
    """A caller broke an operation's precondition (wrong shape, count, order)."""


class WeightFormatError(SwarmGatherError):
    """A weight file is malformed, truncated, or has incompatible shapes."""


class ProtocolError(SwarmGatherError):
    """A wire-protocol message was malformed or out of order."""


class ControllerError(SwarmGatherError):
    """A controller failed while driving an episode."""


class TrainingError(SwarmGatherError):
    """Training aborted (non-finite loss or inconsistent configuration)."""
