"""Exception types shared across the simulator."""


class IonSimError(Exception):
    """Base class for all simulator failures."""


class ConvergenceError(IonSimError):
    """An iterative solver exhausted its budget without reaching tolerance."""


class ZigzagInstabilityError(IonSimError):
    """The linear chain is transversely unstable for the requested trap ratios."""


class SidebandResonanceError(IonSimError):
    """The drive beatnote sits too close to a motional sideband."""


class PowerLawFitError(IonSimError):
    """Averaged couplings are not positive, so a log-log fit is undefined."""


class AmbiguousCouplingError(IonSimError):
    """No excited state with a resolvable field-coupling matrix element was found."""


class StepUnderflowError(IonSimError):
    """The integrator would need a step below the minimum allowed size."""


class NormDriftError(IonSimError):
    """State norm drifted beyond the allowed tolerance during evolution."""


class DetectionInversionError(IonSimError):
    """The per-spin detection channel is singular and cannot be inverted."""


class ConfigError(IonSimError):
    """A run configuration failed validation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
