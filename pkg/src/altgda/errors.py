"""Exception hierarchy shared by every module of the package."""


class AltGDAError(Exception):
    """Base class for all package errors."""


class ContractViolation(AltGDAError, ValueError):
    """An input violates a documented type contract (shape, finiteness, simplex)."""


class ScaleError(AltGDAError, ValueError):
    """The request exceeds a documented size guard."""


class DegeneracyError(AltGDAError, RuntimeError):
    """A numerical procedure met a degenerate instance it cannot resolve."""


class ConfigurationError(AltGDAError, ValueError):
    """A configuration value is missing, unknown or inconsistent."""


class NotAnAltGDAStepError(AltGDAError, ValueError):
    """A pair of iterates is not one AltGDA step apart."""


class PreconditionError(AltGDAError, ValueError):
    """A theorem or lemma is invoked outside the regime where it applies."""


class SamplingError(AltGDAError, RuntimeError):
    """Rejection sampling exhausted its budget."""


class SolverError(AltGDAError, RuntimeError):
    """The external SDP solver failed, timed out or produced unreadable output."""

    def __init__(self, message, output=""):
        super().__init__(message)
        self.output = output


class CertificateRejected(AltGDAError, RuntimeError):
    """A solver solution failed independent verification."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ReconstructionFailed(AltGDAError, RuntimeError):
    """Replaying a reconstructed worst case diverged from the recovered iterates."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
