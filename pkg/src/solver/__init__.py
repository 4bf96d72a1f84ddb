"""Hamiltonian assembly and eigensolvers."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dense import dense_diagonalize, nearest_states
from .hamiltonian import SparseHamiltonian, assemble
from .lanczos import EigenSolution, SolverConfig, lowest_states

__all__ = [
    "Checkpoint",
    "EigenSolution",
    "SolverConfig",
    "SparseHamiltonian",
    "assemble",
    "dense_diagonalize",
    "load_checkpoint",
    "lowest_states",
    "nearest_states",
    "save_checkpoint",
]
