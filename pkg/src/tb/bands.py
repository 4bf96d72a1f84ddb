from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from src.lattice.domain import BOND_COSINES, BOND_QUARTERS
from src.tb.blocks import onsite_block, sk_block
from src.tb.params import TbParameterSet

logger = logging.getLogger(__name__)

# Two atoms x four valence electrons, spin included in the basis.
VALENCE_STATES = 8

# High-symmetry points in units of 2*pi/a.
SYMMETRY_POINTS = {
    "L": (0.5, 0.5, 0.5),
    "G": (0.0, 0.0, 0.0),
    "X": (1.0, 0.0, 0.0),
    "U": (1.0, 0.25, 0.25),
    "K": (0.75, 0.75, 0.0),
}
DEFAULT_ROUTE = ("L", "G", "X", "U", "K", "G")


@dataclass(frozen=True)
class BandStructureReport:
    k_path: np.ndarray
    bands: np.ndarray
    indirect_gap: float
    valley_position: float
    valence_top: float
    conduction_bottom: float
    conduction_minimum_k: Tuple[float, float, float]
    spin_orbit_splitting: Optional[float]

    def to_document(self) -> dict:
        return {
            "indirect_gap_ev": self.indirect_gap,
            "valley_position": self.valley_position,
            "valence_top_ev": self.valence_top,
            "conduction_bottom_ev": self.conduction_bottom,
            "conduction_minimum_k": list(self.conduction_minimum_k),
            "spin_orbit_splitting_ev": self.spin_orbit_splitting,
            "n_kpoints": int(self.k_path.shape[0]),
        }


def k_path_from_route(route: Sequence[str] = DEFAULT_ROUTE, points_per_segment: int = 40) -> np.ndarray:
    """Piecewise-linear path; segment corners are shared, so doubling the density keeps every old point."""
    corners = [np.array(SYMMETRY_POINTS[name], dtype=np.float64) for name in route]
    path: List[np.ndarray] = [corners[0]]
    for start, stop in zip(corners[:-1], corners[1:]):
        for j in range(1, points_per_segment + 1):
            path.append(start + (stop - start) * (j / points_per_segment))
    return np.array(path)


def bloch_hamiltonian(params: TbParameterSet, k: Sequence[float], *, spin_orbit: bool = True) -> np.ndarray:
    """Two-atom Bloch Hamiltonian at k (units of 2*pi/a)."""
    onsite = onsite_block(params, spin_orbit=spin_orbit)
    n = onsite.shape[0]
    kvec = np.asarray(k, dtype=np.float64)
    coupling = np.zeros((n, n), dtype=np.complex128)
    for slot in range(4):
        phase = np.exp(2j * np.pi * float(kvec @ (BOND_QUARTERS[slot] / 4.0)))
        coupling += sk_block(params, BOND_COSINES[slot]) * phase
    hamiltonian = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    hamiltonian[:n, :n] = onsite
    hamiltonian[n:, n:] = onsite
    hamiltonian[:n, n:] = coupling
    hamiltonian[n:, :n] = coupling.conj().T
    return hamiltonian


def band_energies(params: TbParameterSet, k: Sequence[float], *, spin_orbit: bool = True) -> np.ndarray:
    return np.linalg.eigvalsh(bloch_hamiltonian(params, k, spin_orbit=spin_orbit))


def bulk_bands(
    params: TbParameterSet,
    k_path: Optional[Sequence[Sequence[float]]] = None,
    *,
    spin_orbit: bool = True,
    workers: int = 1,
) -> BandStructureReport:
    path = np.asarray(k_path if k_path is not None else k_path_from_route(), dtype=np.float64)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            energies = list(pool.map(lambda k: band_energies(params, k, spin_orbit=spin_orbit), path))
    else:
        energies = [band_energies(params, k, spin_orbit=spin_orbit) for k in path]
    bands = np.array(energies)

    vb_index = int(np.argmax(bands[:, VALENCE_STATES - 1]))
    cb_index = int(np.argmin(bands[:, VALENCE_STATES]))
    valence_top, _ = _refine_extremum(params, path, vb_index, VALENCE_STATES - 1, spin_orbit, maximize=True)
    conduction_bottom, k_min = _refine_extremum(params, path, cb_index, VALENCE_STATES, spin_orbit, maximize=False)

    gamma = np.flatnonzero(np.all(np.abs(path) < 1e-14, axis=1))
    splitting: Optional[float] = None
    if spin_orbit and gamma.size:
        at_gamma = bands[gamma[0]]
        splitting = float(at_gamma[VALENCE_STATES - 1] - at_gamma[VALENCE_STATES - 5])

    report = BandStructureReport(
        k_path=path,
        bands=bands,
        indirect_gap=float(conduction_bottom - valence_top),
        valley_position=float(np.linalg.norm(k_min)),
        valence_top=float(valence_top),
        conduction_bottom=float(conduction_bottom),
        conduction_minimum_k=tuple(float(v) for v in k_min),  # type: ignore[arg-type]
        spin_orbit_splitting=splitting,
    )
    logger.info(
        "Bulk bands: gap %.4f eV, E_VBM %.4f eV, E_CBM %.4f eV, valley at %.4f of G-X",
        report.indirect_gap,
        report.valence_top,
        report.conduction_bottom,
        report.valley_position,
    )
    return report


def _refine_extremum(
    params: TbParameterSet,
    path: np.ndarray,
    index: int,
    band: int,
    spin_orbit: bool,
    *,
    maximize: bool,
) -> Tuple[float, np.ndarray]:
    """Polish a sampled band extremum along the polyline around the sampled point."""
    sign = -1.0 if maximize else 1.0
    last = path.shape[0] - 1

    def point(t: float) -> np.ndarray:
        lower = min(int(np.floor(t)), last - 1) if last > 0 else 0
        frac = t - lower
        if last == 0:
            return path[0]
        return path[lower] + (path[lower + 1] - path[lower]) * frac

    def objective(t: float) -> float:
        return sign * float(band_energies(params, point(t), spin_orbit=spin_orbit)[band])

    sampled = objective(float(index))
    lo, hi = max(index - 1, 0), min(index + 1, last)
    if hi == lo:
        return sign * sampled, path[index]
    result = minimize_scalar(objective, bounds=(float(lo), float(hi)), method="bounded", options={"xatol": 1e-12})
    if result.success and result.fun <= sampled:
        return sign * float(result.fun), point(float(result.x))
    return sign * sampled, path[index]


_EDGE_CACHE: Dict[Tuple[str, bool], BandStructureReport] = {}


def band_edges(params: TbParameterSet, *, spin_orbit: bool = True) -> BandStructureReport:
    """Bulk report on the default path, cached per parameter checksum."""
    key = (params.checksum, spin_orbit)
    report = _EDGE_CACHE.get(key)
    if report is None:
        report = bulk_bands(params, spin_orbit=spin_orbit)
        _EDGE_CACHE[key] = report
    return report


__all__ = [
    "BandStructureReport",
    "DEFAULT_ROUTE",
    "SYMMETRY_POINTS",
    "VALENCE_STATES",
    "band_edges",
    "band_energies",
    "bloch_hamiltonian",
    "bulk_bands",
    "k_path_from_route",
]
