"""Exception types shared across the package."""


class RigidtopError(Exception):
    """Base class for all package errors."""


class SpecMismatchError(RigidtopError):
    """Operands belong to different groups or have the wrong payload shape."""


class UnsupportedKindError(RigidtopError):
    """Operation not available for this group kind."""


class ResourceLimitError(RigidtopError):
    """A configured cap (nodes, memory, iterations) was exceeded.

    Carries enough context to name the offending quantity in reports.
    """

    def __init__(self, message, quantity=None, limit=None, stage=None):
        super().__init__(message)
        self.quantity = quantity
        self.limit = limit
        self.stage = stage


class StageError(RigidtopError):
    """A tower stage could not be built from the given inputs."""


class WindowError(RigidtopError):
    """Configuration windows are incompatible or too large for the tower."""


class PreconditionError(RigidtopError):
    """A documented operation precondition does not hold."""


class CertificateError(RigidtopError):
    """Base class for certificate file problems."""


class CertificateVersionError(CertificateError):
    """Unknown format_version in a certificate file."""


class CertificateChecksumError(CertificateError):
    """Stored checksum does not match the certificate content."""


class CertificateFormatError(CertificateError):
    """Malformed certificate content (bad rationals, wrong shapes, bad JSON)."""
