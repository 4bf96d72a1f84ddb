"""Observables extracted from eigenvectors."""

from .contact import (
    ContactDensity,
    contact_density,
    contact_ratio,
    dipole_moment,
    ground_state,
    level_density,
    position_matrix,
    site_probabilities,
)
from .density import DensityMap, PlaneSpec, density_map, differential_map

__all__ = [
    "ContactDensity",
    "DensityMap",
    "PlaneSpec",
    "contact_density",
    "contact_ratio",
    "density_map",
    "differential_map",
    "dipole_moment",
    "ground_state",
    "level_density",
    "position_matrix",
    "site_probabilities",
]
