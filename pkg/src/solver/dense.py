from __future__ import annotations

import logging
from typing import Optional, Union

import numpy as np
from scipy import linalg

from src.config.settings import settings
from src.errors import DimensionCapError, PreconditionError
from src.solver.hamiltonian import SparseHamiltonian
from src.solver.lanczos import EigenSolution

logger = logging.getLogger(__name__)

DENSE_TOLERANCE = 1e-10


def dense_diagonalize(h: Union[SparseHamiltonian, np.ndarray], cap: Optional[int] = None) -> EigenSolution:
    """Full spectrum by dense Hermitian diagonalisation; refuses dimensions above the cap."""
    limit = settings.runtime.dense_cap if cap is None else cap
    dimension = h.dimension if isinstance(h, SparseHamiltonian) else int(np.shape(h)[0])
    if dimension > limit:
        raise DimensionCapError(
            "dimension exceeds the dense diagonalisation cap", details={"dimension": dimension, "cap": limit}
        )
    matrix = h.to_dense() if isinstance(h, SparseHamiltonian) else np.asarray(h, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise PreconditionError("matrix must be square", details={"shape": list(matrix.shape)})

    eigenvalues, eigenvectors = linalg.eigh(matrix)
    residuals = np.linalg.norm(matrix @ eigenvectors - eigenvectors * eigenvalues[None, :], axis=0)
    gram = eigenvectors.conj().T @ eigenvectors
    defect = float(np.max(np.abs(gram - np.diag(np.diag(gram))))) if dimension > 1 else 0.0
    logger.info("Dense diagonalisation: dimension %d, max residual %.2e", dimension, residuals.max())
    return EigenSolution(
        eigenvalues=np.asarray(eigenvalues, dtype=np.float64),
        eigenvectors=eigenvectors,
        residuals=residuals,
        iterations=1,
        ortho_defect=defect,
        tolerance=DENSE_TOLERANCE,
        mode="dense",
    )


def nearest_states(solution: EigenSolution, sigma: float, count: int) -> EigenSolution:
    """Subset of a full spectrum nearest ``sigma``, ascending."""
    pick = np.sort(np.argsort(np.abs(solution.eigenvalues - sigma), kind="stable")[:count])
    return EigenSolution(
        eigenvalues=solution.eigenvalues[pick],
        eigenvectors=solution.eigenvectors[:, pick],
        residuals=solution.residuals[pick],
        iterations=solution.iterations,
        ortho_defect=solution.ortho_defect,
        tolerance=solution.tolerance,
        sigma=sigma,
        mode=solution.mode,
    )


__all__ = ["DENSE_TOLERANCE", "dense_diagonalize", "nearest_states"]
