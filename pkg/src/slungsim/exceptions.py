"""Exception types raised by the slungsim package."""


class SlungSimError(Exception):
    """Base class for all package-specific errors."""


class AngleBoundsError(SlungSimError, ValueError):
    """An attitude or swing angle left the model's validity region.

    Roll, pitch and both swing angles must stay strictly inside
    (-pi/2, pi/2); the Euler-rate map and several decouplers are
    singular or undefined outside it.
    """


class SingularInertiaError(SlungSimError, ValueError):
    """The generalized mass matrix (or a required sub-block) is not
    positive definite, which signals an invalid state or degenerate
    parameters."""


class ThrustRegimeError(SlungSimError, ValueError):
    """A decoupler received a force vector outside its assumed regime
    (vertical component must be negative, i.e. pointing up in NED)."""


class AllocationError(SlungSimError, ValueError):
    """The rotor allocation matrix is singular (zero arm length or zero
    torque coefficient)."""


class ControlStageError(SlungSimError, RuntimeError):
    """A cascade stage failed; carries the stage name for diagnosis."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"controller stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DivergenceError(SlungSimError, RuntimeError):
    """Simulation state left the model validity region.

    Attributes
    ----------
    time : float
        Simulation time at which divergence was detected.
    log : TrajectoryLog or None
        Partial log up to the failure, when available.
    """

    def __init__(self, message: str, time: float, log=None):
        super().__init__(message)
        self.time = time
        self.log = log


class ScenarioFormatError(SlungSimError, ValueError):
    """A scenario file or override could not be parsed; carries the
    offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NeverSettlesError(SlungSimError, ValueError):
    """Raised only on request; settling-time queries normally return
    ``math.inf`` as the never-settles sentinel."""
