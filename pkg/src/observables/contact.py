from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from src.errors import DegenerateStateError, PreconditionError
from src.lattice.domain import AXES, DomainLattice
from src.solver.lanczos import EigenSolution
from src.tb.params import TbParameterSet

logger = logging.getLogger(__name__)

ALL_ORBITALS = "all_orbitals"
S_ONLY = "s_only"
CONTACT_MODES = (ALL_ORBITALS, S_ONLY)

AxisLike = Union[str, Sequence[float]]


@dataclass(frozen=True)
class ContactDensity:
    total: float
    s_only: float
    mode: str = ALL_ORBITALS

    @property
    def value(self) -> float:
        return self.total if self.mode == ALL_ORBITALS else self.s_only


def _check_unit(psi: np.ndarray, name: str = "psi") -> None:
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-8:
        raise PreconditionError(f"{name} must be unit-norm", details={"norm": norm})


def site_probabilities(psi: np.ndarray, n_basis: int) -> np.ndarray:
    """Probability per site, summed over spin and orbitals."""
    return np.sum(np.abs(psi.reshape(-1, n_basis)) ** 2, axis=1)


def contact_density(
    psi: np.ndarray, donor_index: int, params: TbParameterSet, mode: str = ALL_ORBITALS
) -> ContactDensity:
    if mode not in CONTACT_MODES:
        raise PreconditionError("mode must be 'all_orbitals' or 's_only'", details={"mode": mode})
    _check_unit(psi)
    block = psi.reshape(-1, params.n_basis)[donor_index]
    weights = np.abs(block) ** 2
    s_index = params.s_like_indices()
    s_columns = s_index + [i + params.n_orbitals for i in s_index]
    return ContactDensity(total=float(weights.sum()), s_only=float(weights[s_columns].sum()), mode=mode)


def contact_ratio(
    psi_field: np.ndarray,
    psi_zero: np.ndarray,
    donor_index: int,
    mode: str = ALL_ORBITALS,
    *,
    params: TbParameterSet,
) -> float:
    """A(field) / A(0) from donor-site weights; independent of the global phase of either state."""
    if psi_field.shape != psi_zero.shape:
        raise PreconditionError("states must share the same basis", details={"shapes": [psi_field.shape, psi_zero.shape]})
    numerator = contact_density(psi_field, donor_index, params, mode).value
    denominator = contact_density(psi_zero, donor_index, params, mode).value
    if denominator <= 1e-300:
        raise DegenerateStateError(
            "zero-field state has no weight on the donor site", details={"donor_index": donor_index, "mode": mode}
        )
    return numerator / denominator


def axis_vector(axis: AxisLike) -> np.ndarray:
    if isinstance(axis, str):
        vector = np.zeros(3)
        vector[AXES[axis]] = 1.0
        return vector
    vector = np.asarray(axis, dtype=np.float64)
    return vector / np.linalg.norm(vector)


def dipole_moment(
    psi: np.ndarray,
    lattice: DomainLattice,
    axis: AxisLike = "y",
    origin: Optional[float] = None,
) -> float:
    """Mean displacement <r . axis> - origin in nm; origin defaults to the donor's coordinate."""
    _check_unit(psi)
    direction = axis_vector(axis)
    coordinate = lattice.positions @ direction
    reference = float(lattice.donor_position @ direction) if origin is None else float(origin)
    probabilities = site_probabilities(psi, psi.shape[0] // lattice.n_sites)
    return float(np.dot(probabilities, coordinate - reference))


def position_matrix(
    left: np.ndarray,
    right: np.ndarray,
    lattice: DomainLattice,
    axis: AxisLike = "y",
    origin: Optional[float] = None,
) -> np.ndarray:
    """<left_i | (r . axis - origin) | right_j> for column blocks of states."""
    direction = axis_vector(axis)
    reference = float(lattice.donor_position @ direction) if origin is None else float(origin)
    n_basis = left.shape[0] // lattice.n_sites
    coordinate = np.repeat(lattice.positions @ direction - reference, n_basis)
    return left.conj().T @ (coordinate[:, None] * right)


def ground_state(solution: EigenSolution) -> np.ndarray:
    """A vector of the lowest level once it is checked to be at most a Kramers pair."""
    return solution.vector(solution.ground_level()[0])


def level_density(solution: EigenSolution, indices: List[int], n_basis: int) -> np.ndarray:
    """Per-site probability of a level, averaged over its members."""
    total = np.zeros(solution.dimension // n_basis)
    for index in indices:
        total += site_probabilities(solution.vector(index), n_basis)
    return total / len(indices)


__all__ = [
    "ALL_ORBITALS",
    "CONTACT_MODES",
    "ContactDensity",
    "S_ONLY",
    "axis_vector",
    "contact_density",
    "contact_ratio",
    "dipole_moment",
    "ground_state",
    "level_density",
    "position_matrix",
    "site_probabilities",
]
