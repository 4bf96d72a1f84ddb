"""Tight-binding parameters, Slater-Koster blocks and bulk bands."""

from .bands import BandStructureReport, band_edges, bloch_hamiltonian, bulk_bands, k_path_from_route
from .blocks import hybrid_projector, onsite_block, sk_block, sk_orbital_block, spin_orbit_block
from .params import TbParameterSet, compute_checksum, describe, load_params, load_params_file, save_params

__all__ = [
    "BandStructureReport",
    "TbParameterSet",
    "band_edges",
    "bloch_hamiltonian",
    "bulk_bands",
    "compute_checksum",
    "describe",
    "hybrid_projector",
    "k_path_from_route",
    "load_params",
    "load_params_file",
    "onsite_block",
    "save_params",
    "sk_block",
    "sk_orbital_block",
    "spin_orbit_block",
]
