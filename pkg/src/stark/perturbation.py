from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from src.errors import PreconditionError
from src.lattice.domain import DomainLattice
from src.observables.contact import AxisLike, axis_vector, dipole_moment, position_matrix
from src.potentials.donor import FIELD_EV_PER_VUM_NM
from src.solver.lanczos import EigenSolution

logger = logging.getLogger(__name__)

# Last level's share of the slope above which the sum is reported as unconverged.
CONVERGENCE_THRESHOLD = 0.05


@dataclass(frozen=True)
class PerturbationPrediction:
    """Dipole d(e) = intercept + slope * e + quadratic * e^2 from the zero-field states (nm, V/um)."""

    intercept: float
    slope: float
    quadratic: float
    states_used: int
    partial_slopes: Tuple[float, ...]
    ground_energy: float

    @property
    def last_increment(self) -> float:
        if len(self.partial_slopes) < 2:
            return self.partial_slopes[-1] if self.partial_slopes else 0.0
        return self.partial_slopes[-1] - self.partial_slopes[-2]

    @property
    def converged(self) -> bool:
        if self.slope == 0.0:
            return True
        return abs(self.last_increment) <= CONVERGENCE_THRESHOLD * abs(self.slope)

    def predict(self, fields: Sequence[float], *, include_quadratic: bool = False) -> np.ndarray:
        values = np.asarray(fields, dtype=np.float64)
        result = self.intercept + self.slope * values
        if include_quadratic:
            result = result + self.quadratic * values**2
        return result

    def to_document(self) -> Dict[str, Any]:
        return {
            "intercept_nm": self.intercept,
            "slope_nm_per_V_per_um": self.slope,
            "quadratic_nm_per_V2_um2": self.quadratic,
            "states_used": self.states_used,
            "partial_slopes": list(self.partial_slopes),
            "converged": self.converged,
            "ground_energy_ev": self.ground_energy,
        }


def perturbation_dipole(
    solution: EigenSolution,
    lattice: DomainLattice,
    axis: AxisLike = "y",
    field_direction: Optional[Sequence[float]] = None,
) -> PerturbationPrediction:
    """Dipole response of the ground state from first-order corrected zero-field states.

    The field couples through U = 1e-3 * e * (r - r_donor) . field_direction (eV); the
    sums run over every returned state outside the ground level, level by level.
    """
    if solution.n_states < 2:
        raise PreconditionError("at least two zero-field states are required", details={"n_states": solution.n_states})
    worst = float(np.max(solution.residuals))
    if worst > solution.tolerance:
        raise PreconditionError(
            "zero-field states are not converged", details={"max_residual": worst, "tolerance": solution.tolerance}
        )
    levels = solution.levels()
    ground = solution.ground_level()
    excited_levels = levels[1:]
    if not excited_levels:
        raise PreconditionError("no excited states outside the ground level", details={"n_states": solution.n_states})

    psi0 = solution.vector(ground[0])
    direction = axis_vector(axis) if field_direction is None else axis_vector(field_direction)
    excited = [index for level in excited_levels for index in level]
    vectors = solution.eigenvectors[:, excited]
    energy0 = float(solution.eigenvalues[ground[0]])
    gaps = energy0 - solution.eigenvalues[excited]

    dipole_m0 = position_matrix(vectors, psi0[:, None], lattice, axis)[:, 0]
    coupling_m0 = FIELD_EV_PER_VUM_NM * position_matrix(vectors, psi0[:, None], lattice, direction)[:, 0]
    coefficients = coupling_m0 / gaps

    contributions = 2.0 * np.real(np.conj(dipole_m0) * coefficients)
    partial_slopes = []
    running = 0.0
    offset = 0
    for level in excited_levels:
        running += float(contributions[offset : offset + len(level)].sum())
        offset += len(level)
        partial_slopes.append(running)

    intercept = dipole_moment(psi0, lattice, axis)
    dipole_mn = position_matrix(vectors, vectors, lattice, axis)
    quadratic = float(np.real(coefficients.conj() @ dipole_mn @ coefficients)) - intercept * float(
        np.sum(np.abs(coefficients) ** 2)
    )

    prediction = PerturbationPrediction(
        intercept=intercept,
        slope=running,
        quadratic=quadratic,
        states_used=len(excited),
        partial_slopes=tuple(partial_slopes),
        ground_energy=energy0,
    )
    logger.info(
        "Perturbation dipole: intercept %.6e nm, slope %.6e nm/(V/um) from %d excited states",
        prediction.intercept,
        prediction.slope,
        prediction.states_used,
    )
    if not prediction.converged:
        logger.warning(
            "Perturbation slope not converged: last level contributes %.2e of %.2e",
            prediction.last_increment,
            prediction.slope,
        )
    return prediction


__all__ = ["CONVERGENCE_THRESHOLD", "PerturbationPrediction", "perturbation_dipole"]
