from typing import List, Optional, Tuple


class SigmaFlowError(Exception):
    """Base exception for simulation and analysis errors."""
    def __init__(self, message: str, error_code: str = None):
        super().__init__(message)
        self.error_code = error_code
        self.message = message


class ValidationError(SigmaFlowError):
    """Error for invalid arguments or malformed fields."""
    def __init__(self, message: str, field: str = None):
        error_code = f"VALIDATION_ERROR_{field.upper()}" if field else "VALIDATION_ERROR"
        super().__init__(message, error_code=error_code)
        self.field = field


class ConfigError(SigmaFlowError):
    """Error for run-configuration problems, keyed by dotted path."""
    def __init__(self, message: str, config_key: str = None):
        error_code = f"CONFIG_ERROR_{config_key.upper()}" if config_key else "CONFIG_ERROR"
        super().__init__(message, error_code=error_code)
        self.config_key = config_key


class DomainError(SigmaFlowError):
    """Radius, time or dimension outside the admissible range."""
    def __init__(self, message: str, quantity: str = None):
        error_code = f"DOMAIN_ERROR_{quantity.upper()}" if quantity else "DOMAIN_ERROR"
        super().__init__(message, error_code=error_code)


class EmptyWindowError(SigmaFlowError):
    """No snapshots fall inside a requested time window."""
    def __init__(self, message: str):
        super().__init__(message, error_code="EMPTY_WINDOW")


class SingularPotentialError(SigmaFlowError):
    """The singular potential was evaluated at a matrix with a zero eigenvalue."""
    def __init__(self, message: str, site: Optional[int] = None):
        super().__init__(message, error_code="SINGULAR_POTENTIAL")
        self.site = site


class UnsupportedFamilyError(SigmaFlowError):
    """Operation is not defined for the given potential family."""
    def __init__(self, message: str, family: str = None):
        error_code = f"UNSUPPORTED_FAMILY_{family.upper()}" if family else "UNSUPPORTED_FAMILY"
        super().__init__(message, error_code=error_code)


class DivergenceError(SigmaFlowError):
    """The flow produced a non-finite or runaway state."""
    def __init__(
        self,
        message: str,
        step: int,
        t: float,
        sup_e: float = float("nan"),
        site: Optional[int] = None,
        eigen_trace: Optional[List[Tuple[float, float, int]]] = None,
    ):
        super().__init__(message, error_code="DIVERGED")
        self.step = step
        self.t = t
        self.sup_e = sup_e
        self.site = site
        self.eigen_trace = eigen_trace or []


class UndefinedRatioError(SigmaFlowError):
    """Shell ratio has an empty shell or a vanishing denominator."""
    def __init__(self, message: str):
        super().__init__(message, error_code="UNDEFINED_RATIO")


class FormulaDomainError(SigmaFlowError):
    """mu0 >= 1, so the exponent formula is undefined."""
    def __init__(self, message: str):
        super().__init__(message, error_code="FORMULA_DOMAIN")


class CoverageError(SigmaFlowError):
    """Too few valid shells to form an infimum."""
    def __init__(self, message: str):
        super().__init__(message, error_code="INSUFFICIENT_SHELLS")


class ProjectionError(SigmaFlowError):
    """Every site is too close to singular to project."""
    def __init__(self, message: str):
        super().__init__(message, error_code="PROJECTION_FAILED")


class AlignmentError(SigmaFlowError):
    """Subsampling factor does not divide the grid."""
    def __init__(self, message: str):
        super().__init__(message, error_code="ALIGNMENT_ERROR")


class CoverInvariantError(SigmaFlowError):
    """A Vitali cover failed its own disjointness or coverage check."""
    def __init__(self, message: str):
        super().__init__(message, error_code="COVER_INVARIANT")


class SnapshotFormatError(SigmaFlowError):
    """Snapshot file is malformed at a given byte offset."""
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})", error_code="SNAPSHOT_FORMAT")
        self.offset = offset


class StorageError(SigmaFlowError):
    """Missing or unreadable artifact on disk."""
    def __init__(self, message: str, path: str = None):
        super().__init__(message, error_code="STORAGE_ERROR")
        self.path = path


def handle_error(error: Exception) -> str:
    """Convert errors to user-friendly messages."""
    if isinstance(error, SigmaFlowError):
        return f"{error.message} (Error code: {error.error_code})"
    elif isinstance(error, FileNotFoundError):
        return f"File not found: {error.filename}"
    elif isinstance(error, PermissionError):
        return f"Permission denied: {error.filename}"
    elif isinstance(error, (FloatingPointError, OverflowError)):
        return "A numerical overflow occurred. Try a smaller time step."
    else:
        return "An unexpected error occurred. See the error log for details."
