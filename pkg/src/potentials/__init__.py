"""Donor, field and core potentials plus the central-cell calibration."""

from .calibration import CalibrationResult, calibrate_u0, donor_binding, find_u0
from .core import BmbCoreParams, bmb_core_potential, core_potential_table, load_core_params, load_core_params_file
from .donor import DonorPotentialParams, FieldSpec, donor_potential, field_potential, total_potential

__all__ = [
    "BmbCoreParams",
    "CalibrationResult",
    "DonorPotentialParams",
    "FieldSpec",
    "bmb_core_potential",
    "calibrate_u0",
    "core_potential_table",
    "donor_binding",
    "donor_potential",
    "field_potential",
    "find_u0",
    "load_core_params",
    "load_core_params_file",
    "total_potential",
]
