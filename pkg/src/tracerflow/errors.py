"""Exception types raised across the package."""


class TracerflowError(Exception):
    """Base class for all package-specific errors."""


class SingularSpectrum(TracerflowError):
    """Pointwise density requested for a Dirac-shell spectrum."""


class NonPositiveWavenumber(TracerflowError):
    """Spectrum density evaluated at k <= 0."""


class QuadratureFailure(TracerflowError):
    """Sharp-condition integral could not be decided within budget."""


class NotPowerLaw(TracerflowError):
    """Theoretical exponent requested for a non-power-law family."""


class DegenerateMode(TracerflowError):
    """3D mode resampling failed to produce a usable wavevector."""


class WrongDimension(TracerflowError):
    """Operation not defined for fields of this dimension."""


class FixedPointDiverged(TracerflowError):
    """Implicit midpoint solve failed to reach tolerance.

    Signals that dt is too large relative to the field's Lipschitz
    constant; callers should reduce dt.
    """

    def __init__(self, residual, iterations, message=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            message
            or f"fixed-point residual {residual:.3e} after {iterations} iterations"
        )


class StepFailure(TracerflowError):
    """A particle step failed during an ensemble run."""

    def __init__(self, particle, time, cause=""):
        self.particle = particle
        self.time = time
        msg = f"step failed for particle {particle} at t={time:g}"
        if cause:
            msg += f": {cause}"
        super().__init__(msg)


class InsufficientPoints(TracerflowError):
    """Not enough record times inside the requested fit window."""


class NonPositiveMoment(TracerflowError):
    """Log-log fit requested on a series with non-positive moments."""


class SignalTooWeak(TracerflowError):
    """Stream-function decay fit has too few points above noise."""


class ConfigError(TracerflowError):
    """Invalid or incomplete experiment configuration."""
