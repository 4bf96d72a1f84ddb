"""Field sweeps, Stark fits, perturbation oracle and spin levels."""

from .fit import DiagnosticFit, DipoleFit, StarkFit, fit_coefficients, fit_diagnostic, fit_dipole, fit_stark
from .perturbation import PerturbationPrediction, perturbation_dipole
from .spin import BOHR_MAGNETON_EV_T, SpinLevels, spin_levels
from .sweep import (
    DepthScanEntry,
    DepthScanResult,
    SweepPoint,
    SweepResult,
    analyse_sweep,
    depth_scan,
    depth_trends,
    resolve_u0,
    run_sweep,
)

__all__ = [
    "BOHR_MAGNETON_EV_T",
    "DepthScanEntry",
    "DepthScanResult",
    "DiagnosticFit",
    "DipoleFit",
    "PerturbationPrediction",
    "SpinLevels",
    "StarkFit",
    "SweepPoint",
    "SweepResult",
    "analyse_sweep",
    "depth_scan",
    "depth_trends",
    "fit_coefficients",
    "fit_diagnostic",
    "fit_dipole",
    "fit_stark",
    "perturbation_dipole",
    "resolve_u0",
    "run_sweep",
    "spin_levels",
]
