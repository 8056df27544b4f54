"""Exception types shared across the package.

Sampling-level failures (a stage leaving the high-probability event) are not
exceptions; they are returned as failure records.  The classes here cover
programmer errors, malformed inputs and contract violations.
"""


class RainbowHamError(Exception):
    """Base class for all package errors."""


class MalformedCertificateError(RainbowHamError, ValueError):
    """A certificate whose shape does not match the host graph."""


class FormatError(RainbowHamError, ValueError):
    """A text file (.cgr, .lay, .h3) that violates its format.

    ``line`` is the 1-based line number of the offending record, or None when
    the problem is not tied to one line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParameterRangeError(RainbowHamError, ValueError):
    """A derived probability left the open interval (0, 1)."""


class InfeasibleSplitError(RainbowHamError, ValueError):
    """The color budget cannot be split into three nonempty classes."""


class DomainError(RainbowHamError, ValueError):
    """An argument outside the domain where a quantity is defined."""


class ExposureError(RainbowHamError, RuntimeError):
    """Exposure discipline violated: double reveal or read-before-reveal."""


class PathTooShortError(RainbowHamError, ValueError):
    """The long path is too short to cut into two segments."""


class DegenerateInstanceError(RainbowHamError, ValueError):
    """Too few segments to form the auxiliary digraph."""


class ParityError(RainbowHamError, ValueError):
    """Loose Hamilton cycles need an even number of vertices."""


class InternalInconsistencyError(RainbowHamError, AssertionError):
    """A constructed object failed verification.  Always a bug."""
