from __future__ import annotations

from typing import Any, Dict, List, Optional


class DonorStarkError(RuntimeError):
    """Base error; `code` and `details` feed the CLI error document."""

    code = "donor_stark_error"

    def __init__(self, message: str, *, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = dict(details or {})

    def to_document(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, "details": self.details}


class DomainSpecError(DonorStarkError):
    code = "domain_spec"


class DomainTooSmallError(DomainSpecError):
    code = "domain_too_small"


class SchemaError(DonorStarkError):
    code = "schema"

    def __init__(self, message: str, *, field: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, details={"field": field, **(details or {})})
        self.field = field


class ChecksumError(SchemaError):
    code = "checksum"


class ConfigError(SchemaError):
    code = "config"


class PreconditionError(DonorStarkError):
    code = "precondition"


class AssemblyError(DonorStarkError):
    code = "assembly"


class ConvergenceError(DonorStarkError):
    code = "convergence"

    def __init__(self, message: str, *, trace: List[Dict[str, Any]], details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, details={"trace": trace, **(details or {})})
        self.trace = trace


class EmptyWindowError(DonorStarkError):
    code = "empty_window"


class DimensionCapError(DonorStarkError):
    code = "dimension_cap"


class DegenerateStateError(DonorStarkError):
    """The reference state has no weight on the donor site."""

    code = "degenerate_state"


class DegeneracyError(DonorStarkError):
    """The ground level is not separated from the next level."""

    code = "degeneracy"


class MapRangeError(DonorStarkError):
    code = "map_range"


class CalibrationError(DonorStarkError):
    code = "calibration"

    def __init__(self, message: str, *, trace: List[Dict[str, float]], details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, details={"trace": trace, **(details or {})})
        self.trace = trace


class FitError(DonorStarkError):
    code = "fit"


class IonizationError(DonorStarkError):
    code = "ionization"


class SweepAbortedError(DonorStarkError):
    code = "sweep_aborted"

    def __init__(self, message: str, *, partial: Any, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, details=details)
        self.partial = partial


class CheckpointFormatError(DonorStarkError):
    code = "checkpoint_format"


__all__ = [
    "AssemblyError",
    "CalibrationError",
    "CheckpointFormatError",
    "ChecksumError",
    "ConfigError",
    "ConvergenceError",
    "DegeneracyError",
    "DegenerateStateError",
    "DimensionCapError",
    "DomainSpecError",
    "DomainTooSmallError",
    "DonorStarkError",
    "EmptyWindowError",
    "FitError",
    "IonizationError",
    "MapRangeError",
    "PreconditionError",
    "SchemaError",
    "SweepAbortedError",
]
