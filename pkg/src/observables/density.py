from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.errors import MapRangeError, PreconditionError
from src.lattice.domain import AXES, DomainLattice
from src.observables.contact import site_probabilities

logger = logging.getLogger(__name__)

KINDS = ("plane", "line", "full")


@dataclass(frozen=True)
class PlaneSpec:
    """Cut through the domain.

    ``plane``: sites on the atomic plane normal to ``axis`` nearest ``offset``.
    ``line``: sites on the line through the donor parallel to ``axis``.
    ``full``: every site.
    """

    kind: str = "plane"
    axis: str = "z"
    offset: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PreconditionError("kind must be plane, line or full", details={"kind": self.kind})
        if self.axis not in AXES:
            raise PreconditionError("axis must be x, y or z", details={"axis": self.axis})

    def to_document(self) -> Dict[str, Any]:
        return {"kind": self.kind, "axis": self.axis, "offset_nm": self.offset}


@dataclass(frozen=True, eq=False)
class DensityMap:
    plane: PlaneSpec
    site_indices: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    label: str = ""
    snapped_offset: Optional[float] = None
    domain_total: float = 1.0

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def to_document(self) -> Dict[str, Any]:
        return {
            "plane": self.plane.to_document(),
            "snapped_offset_nm": self.snapped_offset,
            "label": self.label,
            "n_points": self.size,
            "domain_total": self.domain_total,
        }


def select_sites(lattice: DomainLattice, plane: PlaneSpec) -> Tuple[np.ndarray, Optional[float]]:
    """(site indices, snapped offset) for a cut; raises MapRangeError outside the domain."""
    if plane.kind == "full":
        return np.arange(lattice.n_sites), None
    axis = AXES[plane.axis]
    coordinates = lattice.positions[:, axis]
    quarter = lattice.spec.lattice_constant / 4.0
    if plane.kind == "line":
        others = [k for k in range(3) if k != axis]
        donor = lattice.donor_position
        mask = np.all(np.abs(lattice.positions[:, others] - donor[others]) < 1e-9, axis=1)
        indices = np.flatnonzero(mask)
        return indices[np.argsort(coordinates[indices], kind="stable")], None

    offset = float(lattice.donor_position[axis]) if plane.offset is None else float(plane.offset)
    lo, hi = float(coordinates.min()), float(coordinates.max())
    if offset < lo - quarter / 2.0 or offset > hi + quarter / 2.0:
        raise MapRangeError(
            "cut plane lies outside the domain",
            details={"axis": plane.axis, "offset_nm": offset, "range_nm": [lo, hi]},
        )
    planes = np.unique(np.round(coordinates / quarter).astype(np.int64))
    snapped = int(planes[int(np.argmin(np.abs(planes * quarter - offset)))])
    indices = np.flatnonzero(np.round(coordinates / quarter).astype(np.int64) == snapped)
    return indices, snapped * quarter


def density_map(psi: np.ndarray, lattice: DomainLattice, plane: PlaneSpec, label: str = "") -> DensityMap:
    probabilities = site_probabilities(psi, psi.shape[0] // lattice.n_sites)
    indices, snapped = select_sites(lattice, plane)
    return DensityMap(
        plane=plane,
        site_indices=indices,
        positions=lattice.positions[indices],
        values=probabilities[indices],
        label=label,
        snapped_offset=snapped,
        domain_total=float(probabilities.sum()),
    )


def differential_map(
    psi_field: np.ndarray,
    psi_zero: np.ndarray,
    lattice: DomainLattice,
    plane: PlaneSpec,
    label: str = "",
) -> DensityMap:
    """|psi(field)|^2 - |psi(0)|^2 per site on the cut."""
    n_basis = psi_field.shape[0] // lattice.n_sites
    difference = site_probabilities(psi_field, n_basis) - site_probabilities(psi_zero, n_basis)
    indices, snapped = select_sites(lattice, plane)
    return DensityMap(
        plane=plane,
        site_indices=indices,
        positions=lattice.positions[indices],
        values=difference[indices],
        label=label,
        snapped_offset=snapped,
        domain_total=float(difference.sum()),
    )


__all__ = ["DensityMap", "PlaneSpec", "density_map", "differential_map", "select_sites"]
