"""Exception types shared across the library."""


class AirnavError(Exception):
    """Base class for all airnav errors."""


class NotSkewSymmetricError(AirnavError):
    """Matrix handed to unskew() is not skew-symmetric within tolerance."""


class GimbalLockError(AirnavError):
    """Euler-angle extraction attempted with pitch too close to +/-90 deg."""


class DegenerateMatrixError(AirnavError):
    """Matrix cannot be projected onto the rotation group."""


class OutOfRangeError(AirnavError):
    """Trajectory queried outside its time domain."""


class RateMismatchError(AirnavError):
    """Sensor rates do not divide the IMU rate evenly."""


class MissingPayloadError(AirnavError):
    """A measurement payload required by the requested update is absent."""


class SingularInnovationError(AirnavError):
    """Innovation covariance could not be factorized even after jitter."""


class DivergenceError(AirnavError):
    """Observer state or covariance exceeded the numerical divergence floor."""


class ConfigParseError(AirnavError):
    """Config file is syntactically invalid; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ConfigValidationError(AirnavError):
    """Config parsed fine but violates an invariant (message names it)."""
