from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.errors import ConvergenceError, DegeneracyError, EmptyWindowError, PreconditionError
from src.solver.hamiltonian import SparseHamiltonian
from src.tb.bands import band_edges

logger = logging.getLogger(__name__)

MODES = ("folded", "plain")
ORTHO_LIMIT = 1e-8
NORM_LIMIT = 1e-12
STARTS = ("random", "gaussian")


@dataclass(frozen=True)
class SolverConfig:
    """Eigensolver knobs. ``sigma`` None means E_CBM - sigma_offset from the bulk bands."""

    n_states: int = 4
    tolerance: float = 1e-8
    max_iterations: int = 5000
    seed: int = 0
    sigma: Optional[float] = None
    sigma_offset: float = 0.1
    mode: str = "folded"
    start: str = "random"
    block_size: int = 4
    max_basis: int = 64
    window_halfwidth: Optional[float] = 0.5
    check_interval: int = 4
    gaussian_width: float = 2.0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_states < 1:
            raise PreconditionError("n_states must be at least 1", details={"n_states": self.n_states})
        if self.mode not in MODES:
            raise PreconditionError("mode must be 'folded' or 'plain'", details={"mode": self.mode})
        if self.start not in STARTS:
            raise PreconditionError("start must be 'random' or 'gaussian'", details={"start": self.start})
        if not self.tolerance > 0:
            raise PreconditionError("tolerance must be positive", details={"tolerance": self.tolerance})
        if self.block_size < 1 or self.max_iterations < 1 or self.check_interval < 1:
            raise PreconditionError("block_size, max_iterations and check_interval must be positive")

    def replace(self, **changes: Any) -> "SolverConfig":
        return replace(self, **changes)

    def to_document(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    ortho_defect: float
    tolerance: float
    sigma: Optional[float] = None
    mode: str = "dense"
    seed: Optional[int] = None
    trace: Tuple[Dict[str, Any], ...] = ()

    @property
    def n_states(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.eigenvectors.shape[0])

    def vector(self, index: int) -> np.ndarray:
        return self.eigenvectors[:, index]

    def levels(self, degeneracy_tol: Optional[float] = None) -> List[List[int]]:
        """Group state indices into levels; consecutive eigenvalues closer than the tolerance share a level."""
        tol = degeneracy_tol if degeneracy_tol is not None else 10.0 * self.tolerance
        groups: List[List[int]] = []
        for index, value in enumerate(self.eigenvalues):
            if groups and value - self.eigenvalues[groups[-1][-1]] <= tol:
                groups[-1].append(index)
            else:
                groups.append([index])
        return groups

    def ground_level(self, *, max_multiplicity: int = 2) -> List[int]:
        """Indices of the lowest level; more than a Kramers pair is refused."""
        levels = self.levels()
        ground = levels[0]
        if len(ground) > max_multiplicity:
            raise DegeneracyError(
                "ground level is degenerate beyond spin degeneracy",
                details={
                    "multiplicity": len(ground),
                    "energies_ev": [float(self.eigenvalues[i]) for i in ground],
                    "tolerance": 10.0 * self.tolerance,
                },
            )
        return ground

    def level_gap(self) -> Optional[float]:
        levels = self.levels()
        if len(levels) < 2:
            return None
        return float(self.eigenvalues[levels[1][0]] - self.eigenvalues[levels[0][-1]])

    def to_document(self) -> Dict[str, Any]:
        return {
            "eigenvalues_ev": [float(v) for v in self.eigenvalues],
            "residuals_ev": [float(v) for v in self.residuals],
            "iterations": self.iterations,
            "ortho_defect": self.ortho_defect,
            "tolerance": self.tolerance,
            "sigma_ev": self.sigma,
            "mode": self.mode,
            "seed": self.seed,
        }


def default_sigma(h: SparseHamiltonian, config: SolverConfig) -> float:
    if config.sigma is not None:
        return float(config.sigma)
    edges = band_edges(h.params, spin_orbit=h.spin_orbit)
    return edges.conduction_bottom - config.sigma_offset


def start_block(h: SparseHamiltonian, width: int, config: SolverConfig, rng: np.random.Generator) -> np.ndarray:
    dim = h.dimension
    block = rng.standard_normal((dim, width)) + 1j * rng.standard_normal((dim, width))
    if config.start == "gaussian":
        offset = h.lattice.positions - h.lattice.donor_position
        r2 = np.einsum("ij,ij->i", offset, offset)
        envelope = np.exp(-r2 / (2.0 * config.gaussian_width**2))
        block *= np.repeat(envelope, h.n_basis)[:, None]
    q, _ = np.linalg.qr(block)
    return q


def lowest_states(
    h: SparseHamiltonian,
    n_states: Optional[int] = None,
    window: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> EigenSolution:
    """Eigenpairs nearest the target energy ``window`` (eV) by restarted block Lanczos.

    ``folded`` builds the Krylov space of A = (H - sigma)^2 and keeps the Ritz vectors
    with the smallest A values, then splits them by a Rayleigh-Ritz step with H.
    ``plain`` builds the Krylov space of H and keeps the H Ritz pairs nearest sigma.
    """
    config = config or SolverConfig()
    wanted = int(n_states if n_states is not None else config.n_states)
    dim = h.dimension
    if not 1 <= wanted <= dim:
        raise PreconditionError("n_states must lie in [1, dimension]", details={"n_states": wanted, "dimension": dim})
    sigma = float(window) if window is not None else default_sigma(h, config)

    rng = np.random.default_rng(config.seed)
    width = min(max(config.block_size, 1), dim)
    keep = min(max(width, wanted), dim)
    max_basis = min(dim, max(config.max_basis, keep + 2 * width))

    basis = np.zeros((dim, max_basis), dtype=np.complex128)
    projected_h = np.zeros((max_basis, max_basis), dtype=np.complex128)
    projected_a = np.zeros((max_basis, max_basis), dtype=np.complex128)
    basis[:, :width] = start_block(h, width, config, rng)
    filled = width
    current = slice(0, width)
    trace: List[Dict[str, Any]] = []
    iterations = 0

    logger.info(
        "Lanczos (%s): dimension %d, %d states near %.6f eV, block %d, basis cap %d",
        config.mode,
        dim,
        wanted,
        sigma,
        width,
        max_basis,
    )

    while True:
        iterations += 1
        block = basis[:, current]
        known = basis[:, : current.stop]
        h_block = h.apply(block, workers=config.workers)
        if config.mode == "folded":
            shifted = h_block - sigma * block
            krylov = h.apply(shifted, workers=config.workers) - sigma * shifted
        else:
            krylov = h_block
        _store_column(projected_h, known.conj().T @ h_block, current)
        _store_column(projected_a, known.conj().T @ krylov, current)
        processed = current.stop

        exhausted = processed == dim
        restart = filled + min(krylov.shape[1], dim - filled) > max_basis
        if exhausted or restart or iterations % config.check_interval == 0:
            values, coeffs = _select(projected_h, projected_a, processed, sigma, wanted, config.mode)
            vectors = basis[:, :processed] @ coeffs
            vectors /= np.linalg.norm(vectors, axis=0)[None, :]
            h_vectors = h.apply(vectors, workers=config.workers)
            residuals = np.linalg.norm(h_vectors - vectors * values[None, :], axis=0)
            trace.append(
                {
                    "iteration": iterations,
                    "basis_size": processed,
                    "max_residual": float(residuals.max()),
                    "ritz_values": [float(v) for v in values],
                }
            )
            logger.debug(
                "Lanczos iteration %d: basis %d, max residual %.3e", iterations, processed, residuals.max()
            )
            if residuals.max() <= config.tolerance:
                return _finish(values, vectors, residuals, iterations, sigma, config, trace)
            if exhausted:
                raise ConvergenceError(
                    "Krylov space exhausted without meeting the residual tolerance",
                    trace=trace,
                    details={"tolerance": config.tolerance},
                )

        if iterations >= config.max_iterations:
            raise ConvergenceError(
                "Lanczos did not converge within the iteration limit",
                trace=trace,
                details={"max_iterations": config.max_iterations, "tolerance": config.tolerance},
            )

        if restart:
            _, coeffs = _select(projected_h, projected_a, processed, sigma, keep, config.mode)
            retained, _ = np.linalg.qr(basis[:, :processed] @ coeffs)
            projected_h[:] = 0.0
            projected_a[:] = 0.0
            basis[:, :keep] = retained
            basis[:, keep:] = 0.0
            filled = keep
            current = slice(0, keep)
            logger.debug("Lanczos restart after iteration %d, keeping %d vectors", iterations, keep)
            continue

        next_width = min(krylov.shape[1], dim - filled)
        basis[:, filled : filled + next_width] = _orthonormal_extension(
            krylov[:, :next_width], basis[:, :filled], rng
        )
        current = slice(filled, filled + next_width)
        filled += next_width


def _store_column(projected: np.ndarray, column: np.ndarray, current: slice) -> None:
    projected[: current.stop, current] = column
    projected[current, : current.start] = column[: current.start].conj().T


def _hermitian_eigh(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return linalg.eigh(0.5 * (matrix + matrix.conj().T))


def _select(
    projected_h: np.ndarray,
    projected_a: np.ndarray,
    size: int,
    sigma: float,
    count: int,
    mode: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """Ritz values (ascending) and their coefficients in the current basis."""
    small_h = projected_h[:size, :size]
    if mode == "folded":
        _, folded = _hermitian_eigh(projected_a[:size, :size])
        subspace = folded[:, :count]
        values, inner = _hermitian_eigh(subspace.conj().T @ small_h @ subspace)
        return values, subspace @ inner
    theta, coeffs = _hermitian_eigh(small_h)
    pick = np.sort(np.argsort(np.abs(theta - sigma), kind="stable")[:count])
    return theta[pick], coeffs[:, pick]


def _orthonormal_extension(block: np.ndarray, known: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalise ``block`` against ``known`` (two Gram-Schmidt passes); refill lost directions at random."""
    work = block.copy()
    scale = max(float(np.linalg.norm(work, axis=0).max()), 1e-300)
    for _ in range(3):
        for _ in range(2):
            work -= known @ (known.conj().T @ work)
        q, r = np.linalg.qr(work)
        lost = np.abs(np.diag(r)) <= 1e-10 * scale
        if not lost.any():
            return q
        work = q.copy()
        count = int(lost.sum())
        work[:, lost] = rng.standard_normal((work.shape[0], count)) + 1j * rng.standard_normal((work.shape[0], count))
        kept = q[:, ~lost]
        work[:, lost] -= kept @ (kept.conj().T @ work[:, lost])
        scale = max(float(np.linalg.norm(work, axis=0).max()), 1e-300)
    raise ConvergenceError("could not extend the Krylov basis", trace=[])


def orthonormality(vectors: np.ndarray) -> Tuple[float, float]:
    """Largest off-diagonal overlap and largest deviation of a column norm from one."""
    gram = vectors.conj().T @ vectors
    norms = np.sqrt(np.abs(np.real(np.diag(gram))))
    drift = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if gram.shape[0] < 2:
        return 0.0, drift
    return float(np.max(np.abs(gram - np.diag(np.diag(gram))))), drift


def _reorthonormalise(eigenvalues: np.ndarray, vectors: np.ndarray, degeneracy_tol: float) -> np.ndarray:
    """Renormalise every column and symmetrically orthonormalise inside each degenerate level.

    Mixing across distinct levels would no longer give eigenvectors, so overlaps there survive.
    """
    repaired = vectors / np.linalg.norm(vectors, axis=0)[None, :]
    start = 0
    count = eigenvalues.shape[0]
    for stop in range(1, count + 1):
        if stop < count and eigenvalues[stop] - eigenvalues[stop - 1] <= degeneracy_tol:
            continue
        if stop - start > 1:
            group = repaired[:, start:stop]
            weights, rotation = _hermitian_eigh(group.conj().T @ group)
            if weights.min() > 0.0:
                repaired[:, start:stop] = group @ (rotation / np.sqrt(weights)[None, :]) @ rotation.conj().T
        start = stop
    return repaired


def _finish(
    eigenvalues: np.ndarray,
    vectors: np.ndarray,
    residuals: np.ndarray,
    iterations: int,
    sigma: float,
    config: SolverConfig,
    trace: List[Dict[str, Any]],
) -> EigenSolution:
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]
    residuals = residuals[order]
    defect, drift = orthonormality(vectors)
    if defect > ORTHO_LIMIT or drift > NORM_LIMIT:
        logger.warning(
            "Ritz vectors drifted (off-diagonal overlap %.2e, norm drift %.2e); re-orthonormalising",
            defect,
            drift,
        )
        vectors = _reorthonormalise(eigenvalues, vectors, 10.0 * config.tolerance)
        defect, drift = orthonormality(vectors)
        if defect > ORTHO_LIMIT or drift > NORM_LIMIT:
            raise ConvergenceError(
                "Ritz vectors are not orthonormal",
                trace=trace,
                details={"ortho_defect": defect, "norm_drift": drift, "limits": [ORTHO_LIMIT, NORM_LIMIT]},
            )

    if config.window_halfwidth is not None:
        distance = float(np.min(np.abs(eigenvalues - sigma)))
        if distance > config.window_halfwidth:
            raise EmptyWindowError(
                "no eigenvalue inside the requested window",
                details={"sigma_ev": sigma, "halfwidth_ev": config.window_halfwidth, "nearest_ev": distance},
            )

    solution = EigenSolution(
        eigenvalues=eigenvalues,
        eigenvectors=vectors,
        residuals=residuals,
        iterations=iterations,
        ortho_defect=defect,
        tolerance=config.tolerance,
        sigma=sigma,
        mode=config.mode,
        seed=config.seed,
        trace=tuple(trace),
    )
    logger.info(
        "Lanczos converged in %d iterations: E = %s eV, max residual %.2e",
        iterations,
        ", ".join(f"{v:.6f}" for v in eigenvalues),
        float(residuals.max()),
    )
    return solution


__all__ = [
    "EigenSolution",
    "MODES",
    "NORM_LIMIT",
    "ORTHO_LIMIT",
    "STARTS",
    "SolverConfig",
    "default_sigma",
    "lowest_states",
    "orthonormality",
    "start_block",
]
