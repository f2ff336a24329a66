"""Exception hierarchy shared across the package."""


class NfposError(Exception):
    """Base class for all package errors."""


class ConfigError(NfposError, ValueError):
    """Invalid or inconsistent configuration."""


class DomainError(NfposError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateGeometryError(DomainError):
    """UE coincides with an array element."""


class DegenerateNormalizationError(DomainError):
    """Normalization divisor is zero."""


class DataIntegrityError(NfposError, ValueError):
    """Input data violates a structural invariant (e.g. not Hermitian)."""


class ContractError(NfposError, ValueError):
    """Tensor shape does not match the expected contract."""


class FormatError(NfposError):
    """File is not a recognised tensor container or has the wrong version."""


class CorruptionError(NfposError):
    """File content does not match its recorded size or checksum."""


class TrainingDiverged(NfposError, RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class UndefinedGapError(NfposError, ValueError):
    """dB gap requested against a zero reference error."""
