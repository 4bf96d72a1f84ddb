from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import FIRST_EXCEPTION, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.run_config import RunConfig
from src.db.repository import fetch_points, mark_complete, mark_incomplete, upsert_points
from src.errors import DonorStarkError, FitError, IonizationError, PreconditionError, SweepAbortedError
from src.lattice.domain import DomainLattice, DomainSpec, build_domain
from src.observables.contact import ALL_ORBITALS, S_ONLY, contact_density, dipole_moment, ground_state
from src.potentials.calibration import CalibrationResult, calibrate_u0
from src.potentials.donor import DonorPotentialParams, FieldSpec, total_potential
from src.solver.hamiltonian import SparseHamiltonian, assemble
from src.solver.lanczos import EigenSolution, lowest_states
from src.stark.fit import DiagnosticFit, DipoleFit, StarkFit, fit_diagnostic, fit_dipole, fit_stark
from src.tb.params import TbParameterSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class SweepPoint:
    field: float
    ratio_all: float
    ratio_s: float
    dipole: float
    ground_energy: float
    iterations: int
    max_residual: float = 0.0
    level_gap: Optional[float] = None
    eigenvalues: Tuple[float, ...] = ()

    def to_row(self, run_hash: str, depth: float) -> Dict[str, Any]:
        return {
            "run_hash": run_hash,
            "depth_nm": depth,
            "field_v_per_um": self.field,
            "ratio_all": self.ratio_all,
            "ratio_s": self.ratio_s,
            "dipole_nm": self.dipole,
            "ground_energy_ev": self.ground_energy,
            "iterations": self.iterations,
            "payload": {
                "max_residual_ev": self.max_residual,
                "level_gap_ev": self.level_gap,
                "eigenvalues_ev": list(self.eigenvalues),
            },
        }

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> "SweepPoint":
        payload = row.get("payload") or {}
        return cls(
            field=float(row["field_v_per_um"]),
            ratio_all=float(row["ratio_all"]),
            ratio_s=float(row["ratio_s"]),
            dipole=float(row["dipole_nm"]),
            ground_energy=float(row["ground_energy_ev"]),
            iterations=int(row["iterations"]),
            max_residual=float(payload.get("max_residual_ev", 0.0)),
            level_gap=payload.get("level_gap_ev"),
            eigenvalues=tuple(payload.get("eigenvalues_ev", ())),
        )


@dataclass(frozen=True)
class SweepResult:
    """Contact-density ratios and dipoles over a field grid at one donor depth."""

    depth: float
    requested_depth: float
    points: Tuple[SweepPoint, ...]
    u0: float
    run_hash: str
    complete: bool = True
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def fields(self) -> np.ndarray:
        return np.array([point.field for point in self.points])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([point.ratio_all for point in self.points])

    @property
    def ratios_s(self) -> np.ndarray:
        return np.array([point.ratio_s for point in self.points])

    @property
    def delta_A_over_A0(self) -> np.ndarray:
        return self.ratios - 1.0

    @property
    def dipoles(self) -> np.ndarray:
        return np.array([point.dipole for point in self.points])

    def to_document(self) -> Dict[str, Any]:
        return {
            "depth_nm": self.depth,
            "requested_depth_nm": self.requested_depth,
            "u0_ev": self.u0,
            "run_hash": self.run_hash,
            "complete": self.complete,
            "points": [
                {
                    "field_V_per_um": point.field,
                    "ratio_all": point.ratio_all,
                    "ratio_s": point.ratio_s,
                    "dA_over_A0": point.ratio_all - 1.0,
                    "dipole_nm": point.dipole,
                    "ground_energy_ev": point.ground_energy,
                    "iterations": point.iterations,
                    "max_residual_ev": point.max_residual,
                    "level_gap_ev": point.level_gap,
                }
                for point in self.points
            ],
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class DepthScanEntry:
    depth: float
    sweep: Optional[SweepResult] = None
    stark_fit: Optional[StarkFit] = None
    dipole_fit: Optional[DipoleFit] = None
    diagnostic: Optional[DiagnosticFit] = None
    error: Optional[Dict[str, Any]] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.stark_fit is not None and self.dipole_fit is not None

    def to_document(self) -> Dict[str, Any]:
        return {
            "requested_depth_nm": self.depth,
            "depth_nm": None if self.sweep is None else self.sweep.depth,
            "stark_fit": None if self.stark_fit is None else self.stark_fit.to_document(),
            "dipole_fit": None if self.dipole_fit is None else self.dipole_fit.to_document(),
            "diagnostic_fit": None if self.diagnostic is None else self.diagnostic.to_document(),
            "error": self.error,
            "sweep": None if self.sweep is None else self.sweep.to_document(),
        }


@dataclass(frozen=True)
class DepthScanResult:
    entries: Tuple[DepthScanEntry, ...]
    u0: float
    trends: Dict[str, Any]

    def to_document(self) -> Dict[str, Any]:
        return {
            "u0_ev": self.u0,
            "entries": [entry.to_document() for entry in self.entries],
            "trends": self.trends,
        }


def sweep_hash(config: RunConfig, domain: DomainSpec, u0: float) -> str:
    """Key of a sweep in the ledger; independent of the field grid, so grids can grow."""
    document = config.physics_document
    document.pop("depths_nm")
    document.pop("depth_range_nm")
    document["domain"] = domain.to_document()
    document["field"] = {k: v for k, v in document["field"].items() if k != "grid_V_per_um"}
    document["u0_ev"] = repr(float(u0))
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_u0(
    config: RunConfig, params: TbParameterSet, lattice: Optional[DomainLattice] = None
) -> Tuple[float, Optional[CalibrationResult]]:
    """Configured u0, or a calibration on the configured domain when none is set."""
    if config.potential.u0 is not None:
        return float(config.potential.u0), None
    lattice = lattice or build_domain(config.domain)
    potential = config.potential
    result = calibrate_u0(
        lattice,
        params,
        potential.target_binding,
        config.solver_config(),
        kappa=potential.kappa,
        bracket=potential.bracket,
        tolerance=potential.calibration_tolerance,
        max_iterations=potential.calibration_max_iterations,
        cbm_reference=potential.cbm_reference,
        spin_orbit=config.hamiltonian.spin_orbit,
        passivation_shift=config.hamiltonian.passivation_shift,
    )
    return result.u0, result


def _sorted_fields(fields: Sequence[float]) -> Tuple[float, ...]:
    grid = tuple(sorted(float(value) for value in fields))
    if not grid or 0.0 not in grid:
        raise PreconditionError("the field grid must include zero", details={"fields": list(grid)})
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError("fields must be distinct", details={"fields": list(grid)})
    return grid


class _PointSolver:
    """Solves the donor at one field on a fixed lattice and u0."""

    def __init__(
        self,
        lattice: DomainLattice,
        params: TbParameterSet,
        config: RunConfig,
        u0: float,
        base: SparseHamiltonian,
    ) -> None:
        self.lattice = lattice
        self.params = params
        self.config = config
        self.solver_config = config.solver_config()
        self.donor = DonorPotentialParams(kappa=config.potential.kappa, u0=u0, donor_site=lattice.donor_index)
        self.base = base
        self.reference: Optional[Tuple[float, float]] = None

    def solve(self, value: float) -> Tuple[EigenSolution, np.ndarray]:
        efield = FieldSpec(magnitude=value, direction=self.config.efield.direction)
        h = self.base.with_potential(total_potential(self.donor, self.lattice, efield))
        solution = lowest_states(h, self.solver_config.n_states, None, self.solver_config)
        return solution, ground_state(solution)

    def point(self, value: float, solution: EigenSolution, psi: np.ndarray) -> SweepPoint:
        assert self.reference is not None
        contact = contact_density(psi, self.lattice.donor_index, self.params, ALL_ORBITALS)
        ratio_all = contact.total / self.reference[0]
        ratio_s = contact.s_only / self.reference[1] if self.reference[1] > 0 else 0.0
        guard = self.config.efield.ionization_guard
        if ratio_all < guard:
            raise IonizationError(
                "donor-site weight fell below the ionization guard",
                details={"field_V_per_um": value, "ratio": ratio_all, "guard": guard},
            )
        ground = solution.ground_level()
        return SweepPoint(
            field=value,
            ratio_all=ratio_all,
            ratio_s=ratio_s,
            dipole=dipole_moment(psi, self.lattice, self.config.efield.dipole_axis),
            ground_energy=float(solution.eigenvalues[ground[0]]),
            iterations=solution.iterations,
            max_residual=float(np.max(solution.residuals)),
            level_gap=solution.level_gap(),
            eigenvalues=tuple(float(v) for v in solution.eigenvalues),
        )

    def solve_point(self, value: float) -> SweepPoint:
        solution, psi = self.solve(value)
        return self.point(value, solution, psi)


def run_sweep(
    domain: DomainSpec,
    fields: Sequence[float],
    config: RunConfig,
    *,
    params: Optional[TbParameterSet] = None,
    u0: Optional[float] = None,
    ledger: Optional[PathLike] = None,
) -> SweepResult:
    """One zero-field solve plus one solve per field, all at the same u0.

    Points already in ``ledger`` for the same sweep hash are reused. A failing point
    stops the sweep: finished points stay in the ledger, the depth is marked
    incomplete, and SweepAbortedError carries the partial result.
    """
    grid = _sorted_fields(fields)
    params = params or config.load_params()
    started = time.perf_counter()
    lattice = build_domain(domain)
    calibration: Optional[CalibrationResult] = None
    if u0 is None:
        u0, calibration = resolve_u0(config, params, lattice)
    run_hash = sweep_hash(config, domain, u0)
    depth = lattice.snapped_depth

    cached: Dict[float, SweepPoint] = {}
    if ledger is not None:
        for row in fetch_points(ledger, run_hash, depth):
            cached[float(row["field_v_per_um"])] = SweepPoint.from_row(row)
    pending = [value for value in grid if value not in cached]
    logger.info(
        "Sweep at depth %.4f nm (requested %.4f): %d fields, %d cached, u0 %.6f eV",
        depth,
        domain.impurity_depth,
        len(grid),
        len(grid) - len(pending),
        u0,
    )

    points: Dict[float, SweepPoint] = {value: cached[value] for value in grid if value in cached}
    metadata: Dict[str, Any] = {
        "domain": domain.to_document(),
        "n_sites": lattice.n_sites,
        "donor_index": lattice.donor_index,
        "lattice_sha256": lattice.digest(),
        "params_checksum": params.checksum,
        "calibration": None if calibration is None else calibration.to_document(),
        "solver": config.solver.to_document(),
        "cached_points": len(points),
    }

    def partial(error: Exception) -> SweepAbortedError:
        result = _result(domain, depth, points, u0, run_hash, False, metadata)
        if ledger is not None:
            mark_incomplete(ledger, run_hash, depth, {"error": str(error), "fields_done": sorted(points)})
        document = error.to_document() if isinstance(error, DonorStarkError) else {"message": str(error)}
        return SweepAbortedError(
            "sweep aborted; finished points were kept",
            partial=result,
            details={"cause": document, "depth_nm": depth, "fields_done": sorted(points)},
        )

    if pending:
        base = assemble(
            lattice,
            params,
            np.zeros(lattice.n_sites),
            spin_orbit=config.hamiltonian.spin_orbit,
            passivation_shift=config.hamiltonian.passivation_shift,
        )
        solver = _PointSolver(lattice, params, config, u0, base)
        try:
            zero_solution, psi0 = solver.solve(0.0)
            reference = contact_density(psi0, lattice.donor_index, params, ALL_ORBITALS)
            if reference.total <= 1e-300:
                raise IonizationError("zero-field state has no weight on the donor site")
            solver.reference = (reference.total, contact_density(psi0, lattice.donor_index, params, S_ONLY).s_only)
            if 0.0 in pending:
                points[0.0] = solver.point(0.0, zero_solution, psi0)
                _persist(ledger, run_hash, depth, [points[0.0]])
        except Exception as exc:  # pylint: disable=broad-except
            logger.exception("Zero-field solve failed at depth %.4f nm", depth)
            raise partial(exc) from exc

        others = [value for value in pending if value != 0.0]
        failure = _solve_fields(solver, others, config.workers, points, ledger, run_hash, depth)
        if failure is not None:
            raise partial(failure) from failure

    if ledger is not None:
        mark_complete(ledger, run_hash, depth, {"fields": list(grid)})
    metadata["elapsed_s"] = time.perf_counter() - started
    result = _result(domain, depth, points, u0, run_hash, True, metadata)
    logger.info("Sweep at depth %.4f nm finished in %.1f s", depth, metadata["elapsed_s"])
    return result


def _solve_fields(
    solver: _PointSolver,
    values: List[float],
    workers: int,
    points: Dict[float, SweepPoint],
    ledger: Optional[PathLike],
    run_hash: str,
    depth: float,
) -> Optional[Exception]:
    """Solve the non-zero fields over a worker pool; returns the first failure by field order."""
    if not values:
        return None
    failures: Dict[float, Exception] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures: Dict[Future, float] = {pool.submit(solver.solve_point, value): value for value in values}
        remaining = set(futures)
        while remaining:
            done, remaining = wait(remaining, return_when=FIRST_EXCEPTION)
            for future in sorted(done, key=lambda item: futures[item]):
                value = futures[future]
                try:
                    point = future.result()
                except Exception as exc:  # pylint: disable=broad-except
                    logger.error("Sweep point %.6f V/um failed: %s", value, exc)
                    failures[value] = exc
                    continue
                points[value] = point
                _persist(ledger, run_hash, depth, [point])
            if failures:
                for future in remaining:
                    future.cancel()
                wait(remaining)
                for future in remaining:
                    value = futures[future]
                    if future.cancelled():
                        continue
                    if future.exception() is None:
                        points[value] = future.result()
                        _persist(ledger, run_hash, depth, [points[value]])
                break
    if failures:
        return failures[min(failures)]
    return None


def _persist(ledger: Optional[PathLike], run_hash: str, depth: float, points: Sequence[SweepPoint]) -> None:
    if ledger is not None:
        upsert_points(ledger, [point.to_row(run_hash, depth) for point in points])


def _result(
    domain: DomainSpec,
    depth: float,
    points: Dict[float, SweepPoint],
    u0: float,
    run_hash: str,
    complete: bool,
    metadata: Dict[str, Any],
) -> SweepResult:
    return SweepResult(
        depth=depth,
        requested_depth=float(domain.impurity_depth),
        points=tuple(points[value] for value in sorted(points)),
        u0=float(u0),
        run_hash=run_hash,
        complete=complete,
        metadata=dict(metadata),
    )


def analyse_sweep(sweep: SweepResult) -> Tuple[Optional[StarkFit], Optional[DipoleFit], Optional[DiagnosticFit], List[Dict[str, Any]]]:
    """Fits of a finished sweep; fit failures are returned as error documents, not raised."""
    problems: List[Dict[str, Any]] = []
    stark: Optional[StarkFit] = None
    dipole: Optional[DipoleFit] = None
    diagnostic: Optional[DiagnosticFit] = None
    try:
        stark = fit_stark(sweep)
        diagnostic = fit_diagnostic(sweep.fields, sweep.delta_A_over_A0)
    except FitError as exc:
        problems.append(exc.to_document())
    try:
        dipole = fit_dipole(sweep.fields, sweep.dipoles)
    except FitError as exc:
        problems.append(exc.to_document())
    return stark, dipole, diagnostic, problems


def depth_scan(
    depths: Sequence[float],
    fields: Sequence[float],
    config: RunConfig,
    *,
    params: Optional[TbParameterSet] = None,
    u0: Optional[float] = None,
    ledger: Optional[PathLike] = None,
) -> DepthScanResult:
    """Sweep and fit at every depth with a single u0; a failing depth is recorded and skipped.

    Depths run as independent jobs on a pool of ``config.workers`` threads and are
    reduced in ascending depth order, so the result does not depend on the worker count.
    """
    if not depths:
        raise PreconditionError("depth scan needs at least one depth")
    low, high = config.depth_range
    outside = [d for d in depths if not low <= d <= high]
    if outside:
        raise PreconditionError(
            "depths outside the configured range", details={"depths_nm": outside, "range_nm": [low, high]}
        )
    params = params or config.load_params()
    if u0 is None:
        u0, _ = resolve_u0(config, params)

    planned = distinct_planes(depths, config)
    jobs = max(1, min(config.workers, len(planned)))
    inner = config.with_overrides(workers=max(1, config.workers // jobs))
    logger.info("Depth scan: %d depths on %d worker(s), %d worker(s) per sweep", len(planned), jobs, inner.workers)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {depth: pool.submit(_scan_depth, depth, fields, inner, params, u0, ledger) for depth in planned}
    entries = [futures[depth].result() for depth in sorted(futures)]
    trends = depth_trends(entries)
    return DepthScanResult(entries=tuple(entries), u0=float(u0), trends=trends)


def distinct_planes(depths: Sequence[float], config: RunConfig) -> List[float]:
    """Ascending requested depths, keeping the first of any that snap to the same atomic plane."""
    kept: Dict[float, float] = {}
    for depth in sorted(float(d) for d in depths):
        plane = round(build_domain(config.domain_at(depth)).snapped_depth, 9)
        if plane in kept:
            logger.warning(
                "Depth %.4f nm snaps to the plane at %.4f nm already scanned for %.4f nm; skipped",
                depth,
                plane,
                kept[plane],
            )
            continue
        kept[plane] = depth
    return list(kept.values())


def _scan_depth(
    depth: float,
    fields: Sequence[float],
    config: RunConfig,
    params: TbParameterSet,
    u0: float,
    ledger: Optional[PathLike],
) -> DepthScanEntry:
    try:
        sweep = run_sweep(config.domain_at(depth), fields, config, params=params, u0=u0, ledger=ledger)
    except DonorStarkError as exc:
        logger.error("Depth %.4f nm failed: %s", depth, exc)
        partial = exc.partial if isinstance(exc, SweepAbortedError) else None
        return DepthScanEntry(depth=depth, sweep=partial, error=exc.to_document())
    stark, dipole, diagnostic, problems = analyse_sweep(sweep)
    return DepthScanEntry(
        depth=depth,
        sweep=sweep,
        stark_fit=stark,
        dipole_fit=dipole,
        diagnostic=diagnostic,
        error=problems[0] if problems else None,
    )


def _strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def depth_trends(entries: Sequence[DepthScanEntry]) -> Dict[str, Any]:
    """Monotonic-trend diagnostics over the successful depths (ascending)."""
    good = [entry for entry in entries if entry.ok]
    trends: Dict[str, Any] = {
        "depths_nm": [entry.depth for entry in good],
        "eta1_abs_decreasing": None,
        "intercept_abs_decreasing": None,
        "eta2_relative_change_deepest": None,
        "peak_field_shallowest": None,
    }
    if len(good) >= 2:
        eta1 = [abs(entry.stark_fit.eta1) for entry in good]  # type: ignore[union-attr]
        intercepts = [abs(entry.dipole_fit.intercept) for entry in good]  # type: ignore[union-attr]
        trends["eta1_abs_decreasing"] = _strictly_decreasing(eta1)
        trends["intercept_abs_decreasing"] = _strictly_decreasing(intercepts)
        deep, deeper = good[-2].stark_fit.eta2, good[-1].stark_fit.eta2  # type: ignore[union-attr]
        trends["eta2_relative_change_deepest"] = abs(deeper - deep) / abs(deeper) if deeper != 0 else None
        if not trends["eta1_abs_decreasing"]:
            logger.warning("|eta1| does not decrease monotonically with depth: %s", eta1)
        if not trends["intercept_abs_decreasing"]:
            logger.warning("|dipole intercept| does not decrease monotonically with depth: %s", intercepts)
    if good:
        trends["peak_field_shallowest"] = good[0].stark_fit.peak_field  # type: ignore[union-attr]
    return trends


__all__ = [
    "DepthScanEntry",
    "DepthScanResult",
    "SweepPoint",
    "SweepResult",
    "analyse_sweep",
    "depth_scan",
    "depth_trends",
    "distinct_planes",
    "resolve_u0",
    "run_sweep",
    "sweep_hash",
]
