from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import constants

from src.errors import PreconditionError
from src.lattice.domain import AXES, DomainLattice

logger = logging.getLogger(__name__)

# e^2 / (4 pi eps0) expressed in eV nm.
COULOMB_EV_NM = constants.e / (4.0 * math.pi * constants.epsilon_0) * 1e9
# Field vector along -y, pointing at the interface plane y = 0.
DEFAULT_FIELD_DIRECTION = (0.0, -1.0, 0.0)
# Potential energy of one electron charge per (V/um * nm).
FIELD_EV_PER_VUM_NM = 1e-3


@dataclass(frozen=True)
class DonorPotentialParams:
    kappa: float
    u0: float
    donor_site: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa > 1.0):
            raise PreconditionError("kappa must be a finite number greater than 1", details={"kappa": self.kappa})
        if not math.isfinite(self.u0):
            raise PreconditionError("u0 must be finite", details={"u0": self.u0})


@dataclass(frozen=True)
class FieldSpec:
    """Uniform field in V/um; ``gauge_origin`` None means the donor site."""

    magnitude: float
    direction: Tuple[float, float, float] = DEFAULT_FIELD_DIRECTION
    gauge_origin: Optional[Tuple[float, float, float]] = None

    def __post_init__(self) -> None:
        direction = tuple(float(v) for v in self.direction)
        if len(direction) != 3 or abs(math.sqrt(sum(v * v for v in direction)) - 1.0) > 1e-12:
            raise PreconditionError("field direction must be a unit 3-vector", details={"direction": list(direction)})
        object.__setattr__(self, "direction", direction)
        if not math.isfinite(self.magnitude):
            raise PreconditionError("field magnitude must be finite", details={"magnitude": self.magnitude})
        if self.gauge_origin is not None:
            object.__setattr__(self, "gauge_origin", tuple(float(v) for v in self.gauge_origin))

    @classmethod
    def along_axis(cls, magnitude: float, axis: str = "y", sign: float = 1.0) -> "FieldSpec":
        direction = [0.0, 0.0, 0.0]
        direction[AXES[axis]] = 1.0 if sign >= 0 else -1.0
        return cls(magnitude=magnitude, direction=tuple(direction))  # type: ignore[arg-type]

    def with_magnitude(self, magnitude: float) -> "FieldSpec":
        return FieldSpec(magnitude=magnitude, direction=self.direction, gauge_origin=self.gauge_origin)

    def resolved_origin(self, lattice: DomainLattice) -> np.ndarray:
        if self.gauge_origin is None:
            return np.array(lattice.donor_position, dtype=np.float64)
        return np.array(self.gauge_origin, dtype=np.float64)

    def to_document(self) -> Dict[str, object]:
        return {
            "magnitude_V_per_um": self.magnitude,
            "direction": list(self.direction),
            "gauge_origin_nm": None if self.gauge_origin is None else list(self.gauge_origin),
        }


def donor_potential(params: DonorPotentialParams, lattice: DomainLattice) -> np.ndarray:
    """Screened Coulomb energy per site, with -u0 on the donor site itself."""
    if not 0 <= params.donor_site < lattice.n_sites:
        raise PreconditionError(
            "donor_site is outside the lattice", details={"donor_site": params.donor_site, "n_sites": lattice.n_sites}
        )
    displacement = lattice.positions - lattice.positions[params.donor_site]
    distance = np.sqrt(np.einsum("ij,ij->i", displacement, displacement))
    potential = np.empty(lattice.n_sites, dtype=np.float64)
    others = distance > 0
    potential[others] = -COULOMB_EV_NM / (params.kappa * distance[others])
    potential[~others] = -params.u0
    return potential


def field_potential(field: FieldSpec, lattice: DomainLattice) -> np.ndarray:
    origin = field.resolved_origin(lattice)
    projection = (lattice.positions - origin) @ np.asarray(field.direction, dtype=np.float64)
    return FIELD_EV_PER_VUM_NM * field.magnitude * projection


def total_potential(
    params: DonorPotentialParams, lattice: DomainLattice, field: Optional[FieldSpec] = None
) -> np.ndarray:
    potential = donor_potential(params, lattice)
    if field is not None and field.magnitude != 0.0:
        potential = potential + field_potential(field, lattice)
    return potential


def unit_vector(values: Sequence[float]) -> Tuple[float, float, float]:
    vector = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vector))
    if vector.shape != (3,) or norm == 0.0:
        raise PreconditionError("direction must be a non-zero 3-vector", details={"direction": list(values)})
    return tuple(float(v) for v in vector / norm)  # type: ignore[return-value]


__all__ = [
    "COULOMB_EV_NM",
    "DEFAULT_FIELD_DIRECTION",
    "DonorPotentialParams",
    "FieldSpec",
    "donor_potential",
    "field_potential",
    "total_potential",
    "unit_vector",
]
