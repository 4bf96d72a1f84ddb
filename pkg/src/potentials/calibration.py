from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.errors import CalibrationError, DonorStarkError, PreconditionError
from src.lattice.domain import DomainLattice
from src.potentials.donor import DonorPotentialParams, donor_potential
from src.solver.hamiltonian import assemble
from src.solver.lanczos import EigenSolution, SolverConfig, lowest_states
from src.tb.bands import band_edges
from src.tb.params import TbParameterSet

logger = logging.getLogger(__name__)

CBM_REFERENCES = ("bulk", "domain")


@dataclass(frozen=True)
class CalibrationResult:
    u0: float
    binding: float
    ground_energy: float
    e_cbm: float
    cbm_reference: str
    trace: Tuple[Dict[str, float], ...]

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_document(self) -> Dict[str, Any]:
        return {
            "u0_ev": self.u0,
            "binding_ev": self.binding,
            "ground_energy_ev": self.ground_energy,
            "e_cbm_ev": self.e_cbm,
            "cbm_reference": self.cbm_reference,
            "iterations": self.iterations,
            "trace": list(self.trace),
        }


class _Converged(Exception):
    def __init__(self, u0: float, binding: float) -> None:
        super().__init__(u0)
        self.u0 = u0
        self.binding = binding


def ground_energy(solution: EigenSolution, floor: float) -> float:
    """Lowest eigenvalue above ``floor`` (the bulk valence-band top)."""
    above = solution.eigenvalues[solution.eigenvalues > floor]
    if above.size == 0:
        raise PreconditionError("no returned state lies above the valence band", details={"floor_ev": floor})
    return float(above.min())


def conduction_edge(
    lattice: DomainLattice,
    params: TbParameterSet,
    solver_config: SolverConfig,
    *,
    cbm_reference: str = "bulk",
    spin_orbit: bool = True,
    passivation_shift: float = 30.0,
) -> float:
    if cbm_reference not in CBM_REFERENCES:
        raise PreconditionError("cbm_reference must be 'bulk' or 'domain'", details={"cbm_reference": cbm_reference})
    edges = band_edges(params, spin_orbit=spin_orbit)
    if cbm_reference == "bulk":
        return edges.conduction_bottom
    empty = assemble(
        lattice, params, np.zeros(lattice.n_sites), spin_orbit=spin_orbit, passivation_shift=passivation_shift
    )
    solution = lowest_states(empty, solver_config.n_states, None, solver_config)
    return ground_energy(solution, edges.valence_top)


def donor_binding(
    lattice: DomainLattice,
    params: TbParameterSet,
    u0: float,
    solver_config: SolverConfig,
    *,
    e_cbm: float,
    kappa: float = 11.9,
    spin_orbit: bool = True,
    passivation_shift: float = 30.0,
) -> Tuple[float, float, EigenSolution]:
    """(binding, ground energy, solution) for one central-cell value at zero field."""
    potential = donor_potential(DonorPotentialParams(kappa=kappa, u0=u0, donor_site=lattice.donor_index), lattice)
    h = assemble(lattice, params, potential, spin_orbit=spin_orbit, passivation_shift=passivation_shift)
    solution = lowest_states(h, solver_config.n_states, None, solver_config)
    energy = ground_energy(solution, band_edges(params, spin_orbit=spin_orbit).valence_top)
    return e_cbm - energy, energy, solution


def find_u0(
    binding_of: Callable[[float], float],
    target: float,
    *,
    bracket: Sequence[float] = (0.0, 20.0),
    tolerance: float = 5e-5,
    max_iterations: int = 30,
    scan_points: int = 5,
) -> Tuple[float, float, List[Dict[str, float]]]:
    """Root of binding_of(u0) = target: a coarse scan locates a sign change, Brent's method refines it.

    Stops as soon as an evaluation is within ``tolerance`` (eV) of the target.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise PreconditionError("calibration bracket must be increasing", details={"bracket": [lo, hi]})
    trace: List[Dict[str, float]] = []

    def objective(u0: float) -> float:
        if len(trace) >= max_iterations:
            raise CalibrationError("calibration exceeded the iteration budget", trace=trace)
        binding = float(binding_of(u0))
        residual = binding - target
        trace.append({"u0_ev": float(u0), "binding_ev": binding, "residual_ev": residual})
        logger.info("Calibration step %d: u0 %.6f eV -> binding %.6f meV", len(trace), u0, 1e3 * binding)
        if abs(residual) <= tolerance:
            raise _Converged(u0, binding)
        return residual

    try:
        grid = np.linspace(lo, hi, max(scan_points, 2))
        previous_u0, previous = float(grid[0]), objective(float(grid[0]))
        for point in grid[1:]:
            value = objective(float(point))
            if np.sign(value) != np.sign(previous):
                brentq(objective, previous_u0, float(point), xtol=1e-9, maxiter=max_iterations)
                break
            previous_u0, previous = float(point), value
        else:
            raise CalibrationError(
                "target binding is not reachable inside the u0 bracket",
                trace=trace,
                details={"bracket": [lo, hi], "target_ev": target},
            )
    except _Converged as done:
        return done.u0, done.binding, trace
    except DonorStarkError:
        raise
    except RuntimeError as exc:
        raise CalibrationError(f"root finding failed: {exc}", trace=trace) from exc

    best = min(trace, key=lambda step: abs(step["residual_ev"]))
    if abs(best["residual_ev"]) <= tolerance:
        return best["u0_ev"], best["binding_ev"], trace
    raise CalibrationError(
        "root finding stopped outside the binding tolerance", trace=trace, details={"tolerance_ev": tolerance}
    )


def calibrate_u0(
    lattice: DomainLattice,
    params: TbParameterSet,
    target_binding: float,
    solver_config: Optional[SolverConfig] = None,
    *,
    kappa: float = 11.9,
    bracket: Sequence[float] = (0.0, 20.0),
    tolerance: float = 5e-5,
    max_iterations: int = 30,
    cbm_reference: str = "bulk",
    spin_orbit: bool = True,
    passivation_shift: float = 30.0,
) -> CalibrationResult:
    """Central-cell energy u0 (eV) giving E_CBM - E_ground = target_binding at zero field."""
    config = solver_config or SolverConfig()
    e_cbm = conduction_edge(
        lattice,
        params,
        config,
        cbm_reference=cbm_reference,
        spin_orbit=spin_orbit,
        passivation_shift=passivation_shift,
    )
    energies: Dict[float, float] = {}

    def binding_of(u0: float) -> float:
        binding, energy, _ = donor_binding(
            lattice,
            params,
            u0,
            config,
            e_cbm=e_cbm,
            kappa=kappa,
            spin_orbit=spin_orbit,
            passivation_shift=passivation_shift,
        )
        energies[u0] = energy
        return binding

    u0, binding, trace = find_u0(
        binding_of,
        target_binding,
        bracket=bracket,
        tolerance=tolerance,
        max_iterations=max_iterations,
    )
    result = CalibrationResult(
        u0=u0,
        binding=binding,
        ground_energy=energies[u0],
        e_cbm=e_cbm,
        cbm_reference=cbm_reference,
        trace=tuple(trace),
    )
    logger.info(
        "Calibrated u0 = %.6f eV (binding %.4f meV, %s E_CBM %.6f eV) in %d evaluations",
        u0,
        1e3 * binding,
        cbm_reference,
        e_cbm,
        result.iterations,
    )
    return result


__all__ = [
    "CBM_REFERENCES",
    "CalibrationResult",
    "calibrate_u0",
    "conduction_edge",
    "donor_binding",
    "find_u0",
    "ground_energy",
]
