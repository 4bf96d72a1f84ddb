from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from src.errors import FitError

logger = logging.getLogger(__name__)

MIN_DISTINCT_FIELDS = 4


@dataclass(frozen=True, eq=False)
class StarkFit:
    """dA/A0 = eta2 * e^2 + eta1 * e, fitted through the origin.

    Units: eta2 in um^2/V^2, eta1 in um/V, fields in V/um.
    """

    eta2: float
    eta1: float
    covariance: np.ndarray
    residuals: np.ndarray
    rms_residual: float
    n_points: int

    @property
    def eta2_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def eta1_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[1, 1], 0.0)))

    @property
    def peak_field(self) -> Optional[float]:
        if self.eta2 == 0.0:
            return None
        return -self.eta1 / (2.0 * self.eta2)

    @property
    def anomaly(self) -> bool:
        return self.eta2 >= 0.0

    def predict(self, fields: Sequence[float]) -> np.ndarray:
        values = np.asarray(fields, dtype=np.float64)
        return self.eta2 * values**2 + self.eta1 * values

    def to_document(self) -> Dict[str, Any]:
        return {
            "eta2_um2_per_V2": self.eta2,
            "eta1_um_per_V": self.eta1,
            "eta2_sigma": self.eta2_sigma,
            "eta1_sigma": self.eta1_sigma,
            "covariance": self.covariance.tolist(),
            "rms_residual": self.rms_residual,
            "peak_field_V_per_um": self.peak_field,
            "n_points": self.n_points,
            "anomaly": self.anomaly,
        }


@dataclass(frozen=True, eq=False)
class DiagnosticFit:
    """Same model with a free constant; a constant far from zero points at a biased pipeline."""

    eta2: float
    eta1: float
    constant: float
    covariance: np.ndarray
    rms_residual: float

    @property
    def constant_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[2, 2], 0.0)))

    def to_document(self) -> Dict[str, Any]:
        return {
            "eta2_um2_per_V2": self.eta2,
            "eta1_um_per_V": self.eta1,
            "constant": self.constant,
            "constant_sigma": self.constant_sigma,
            "covariance": self.covariance.tolist(),
            "rms_residual": self.rms_residual,
        }


@dataclass(frozen=True)
class DipoleFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float = 0.0
    intercept_stderr: float = 0.0

    def to_document(self) -> Dict[str, Any]:
        return {
            "slope_nm_per_V_per_um": self.slope,
            "intercept_nm": self.intercept,
            "r_squared": self.r_squared,
            "slope_stderr": self.slope_stderr,
            "intercept_stderr": self.intercept_stderr,
        }


def _least_squares(design: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(coefficients, covariance, residuals); covariance = s^2 (X^T X)^-1 from the SVD of X."""
    n_points, n_params = design.shape
    u, singular, vh = linalg.svd(design, full_matrices=False)
    cutoff = singular.max() * max(n_points, n_params) * np.finfo(np.float64).eps if singular.size else 0.0
    rank = int(np.count_nonzero(singular > cutoff))
    if rank < n_params:
        raise FitError(
            "fit design is rank deficient",
            details={"rank": rank, "parameters": n_params, "points": n_points},
        )
    coefficients = vh.T @ ((u.T @ target) / singular)
    residuals = target - design @ coefficients
    dof = n_points - n_params
    variance = float(residuals @ residuals) / dof if dof > 0 else 0.0
    covariance = variance * (vh.T @ (vh / singular[:, None] ** 2))
    return coefficients, covariance, residuals


def _validated(fields: Sequence[float], values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(fields, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("fields and values must be 1-D sequences of equal length", details={"shapes": [x.shape, y.shape]})
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("fit inputs must be finite")
    return x, y


def fit_coefficients(fields: Sequence[float], delta: Sequence[float]) -> StarkFit:
    """Ordinary least squares of dA/A0 on (e^2, e) with no constant term."""
    x, y = _validated(fields, delta)
    distinct = np.unique(x)
    if distinct.size < MIN_DISTINCT_FIELDS:
        raise FitError(
            f"a Stark fit needs at least {MIN_DISTINCT_FIELDS} distinct fields",
            details={"distinct_fields": distinct.tolist()},
        )
    if not np.any(distinct == 0.0):
        raise FitError("the field grid must include zero", details={"fields": distinct.tolist()})
    design = np.column_stack([x**2, x])
    coefficients, covariance, residuals = _least_squares(design, y)
    fit = StarkFit(
        eta2=float(coefficients[0]),
        eta1=float(coefficients[1]),
        covariance=covariance,
        residuals=residuals,
        rms_residual=float(np.sqrt(np.mean(residuals**2))),
        n_points=int(x.size),
    )
    if fit.anomaly:
        logger.warning("Fitted eta2 = %.4e um^2/V^2 is not negative (hyperfine not depressed)", fit.eta2)
    return fit


def fit_diagnostic(fields: Sequence[float], delta: Sequence[float]) -> DiagnosticFit:
    x, y = _validated(fields, delta)
    design = np.column_stack([x**2, x, np.ones_like(x)])
    coefficients, covariance, residuals = _least_squares(design, y)
    return DiagnosticFit(
        eta2=float(coefficients[0]),
        eta1=float(coefficients[1]),
        constant=float(coefficients[2]),
        covariance=covariance,
        rms_residual=float(np.sqrt(np.mean(residuals**2))),
    )


def fit_stark(sweep: Any) -> StarkFit:
    """Fit a SweepResult (anything with ``fields`` and ``delta_A_over_A0``)."""
    return fit_coefficients(sweep.fields, sweep.delta_A_over_A0)


def fit_dipole(fields: Sequence[float], dipoles: Sequence[float]) -> DipoleFit:
    x, y = _validated(fields, dipoles)
    if np.unique(x).size < 2:
        raise FitError("a dipole fit needs at least two distinct fields", details={"fields": x.tolist()})
    result = stats.linregress(x, y)
    return DipoleFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        slope_stderr=float(result.stderr),
        intercept_stderr=float(result.intercept_stderr),
    )


__all__ = [
    "DiagnosticFit",
    "DipoleFit",
    "MIN_DISTINCT_FIELDS",
    "StarkFit",
    "fit_coefficients",
    "fit_diagnostic",
    "fit_dipole",
    "fit_stark",
]
