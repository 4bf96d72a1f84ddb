from __future__ import annotations

import hashlib
import logging
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import constants

from src.config.run_config import RunConfig
from src.config.settings import settings
from src.errors import DegenerateStateError, DonorStarkError, FitError, PreconditionError
from src.lattice.domain import DomainSpec, build_domain
from src.observables.contact import ALL_ORBITALS, contact_density, dipole_moment, ground_state
from src.observables.density import PlaneSpec, density_map, differential_map
from src.outputs.files import (
    figure_frames,
    read_csv,
    read_json,
    write_bands,
    write_density_map,
    write_figure_csvs,
    write_json,
    write_sweep,
    write_table,
)
from src.outputs.manifest import RunManifest, write_manifest
from src.outputs.svg import Series, heatmap, line_chart, series_by_depth, write_svg
from src.potentials.core import core_potential_table, load_core_params_file
from src.potentials.donor import DonorPotentialParams, FieldSpec, total_potential
from src.solver.checkpoint import save_checkpoint
from src.solver.dense import dense_diagonalize, nearest_states
from src.solver.hamiltonian import assemble
from src.solver.lanczos import lowest_states
from src.stark.perturbation import perturbation_dipole
from src.stark.spin import spin_levels
from src.stark.sweep import analyse_sweep, depth_scan, resolve_u0, run_sweep
from src.tb.bands import bulk_bands
from src.tb.params import TbParameterSet

logger = logging.getLogger(__name__)

CORE_Q_GRID = np.linspace(0.0, 50.0, 201)
ORACLE_FIELDS = (-0.2, -0.1, 0.0, 0.1, 0.2)
ORACLE_MIN_STATES = 8
ORACLE_AGREEMENT = 0.05
DENSE_CHECK_CELLS = 2
DENSE_CHECK_TOLERANCE = 1e-9
DENSE_CHECK_OVERLAP = 1.0 - 1e-8
SI_P_G_FACTOR = 1.9985
SI_P_A0_MHZ = 117.53
MHZ_TO_EV = 1e6 * constants.h / constants.e


def ledger_path(config: RunConfig) -> Path:
    return Path(config.output_dir) / settings.paths.results_db_name


def _file_checksum(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _core_params_path(config: RunConfig) -> Path:
    return config.core_params_file or settings.paths.core_params_file


@contextmanager
def _run(command: str, config: RunConfig, params: Optional[TbParameterSet] = None) -> Iterator[RunManifest]:
    """Manifest for one subcommand; written on success and on failure."""
    manifest = RunManifest(command=command, config_hash=config.config_hash, seed=config.solver.seed)
    if params is not None:
        manifest.param_checksums["tb_params"] = params.checksum
    core_path = _core_params_path(config)
    if core_path.exists():
        manifest.param_checksums["core_params"] = _file_checksum(core_path)
    manifest.extra["workers"] = config.workers
    try:
        yield manifest
        manifest.extra["status"] = "ok"
    except DonorStarkError as exc:
        manifest.extra["status"] = "failed"
        manifest.extra["error"] = exc.to_document()
        logger.error("%s failed: %s", command, exc)
        raise
    except Exception as exc:  # pylint: disable=broad-except
        manifest.extra["status"] = "failed"
        manifest.extra["error"] = {"error": "internal", "message": str(exc)}
        logger.exception("Unhandled error during %s: %s", command, exc)
        raise
    finally:
        write_manifest(config.output_dir, manifest)


def run_bands(config: RunConfig) -> Dict[str, Any]:
    params = config.load_params()
    out_dir = Path(config.output_dir)
    with _run("bands", config, params) as manifest:
        with manifest.stage("bands"):
            report = bulk_bands(params, spin_orbit=config.hamiltonian.spin_orbit, workers=config.workers)
        summary = report.to_document()
        checks: Dict[str, Any] = {}
        gap_target = params.published_targets.get("indirect_gap_ev")
        if gap_target is not None:
            checks["indirect_gap_within_0.05_ev"] = abs(report.indirect_gap - gap_target) <= 0.05
        checks["valley_in_0.81_0.85"] = 0.81 <= report.valley_position <= 0.85
        summary["published_targets"] = dict(params.published_targets)
        summary["checks"] = checks
        for path in write_bands(out_dir, report.k_path, report.bands, summary, config.config_hash):
            manifest.add_output(path)

        core = load_core_params_file(_core_params_path(config))
        table = core_potential_table(core, CORE_Q_GRID)
        frame = pd.DataFrame({"q_per_nm": table[:, 0], "u_core": table[:, 1]})
        manifest.add_output(write_table(out_dir, "core_potential", frame, config.config_hash, ["q_per_nm"]))
        if not all(checks.values()):
            logger.warning("Bulk band checks failed: %s", checks)
        return summary


def run_calibrate(config: RunConfig) -> Dict[str, Any]:
    params = config.load_params()
    with _run("calibrate", config, params) as manifest:
        with manifest.stage("lattice"):
            lattice = build_domain(config.domain)
        manifest.snapped_depth_nm = lattice.snapped_depth
        with manifest.stage("calibrate"):
            u0, calibration = resolve_u0(replace(config, potential=replace(config.potential, u0=None)), params, lattice)
        manifest.u0_ev = u0
        document = {
            "config_hash": config.config_hash,
            "domain": config.domain.to_document(),
            "snapped_depth_nm": lattice.snapped_depth,
            "n_sites": lattice.n_sites,
            "calibration": None if calibration is None else calibration.to_document(),
        }
        manifest.add_output(write_json(Path(config.output_dir) / "calibration.json", document))
        return document


def run_solve(
    config: RunConfig,
    *,
    field_value: Optional[float] = None,
    b0: float = 0.0,
    g_factor: float = SI_P_G_FACTOR,
    a0_mhz: float = SI_P_A0_MHZ,
) -> Dict[str, Any]:
    """Zero-field and one finite-field eigensolve at the configured depth, with observables and maps."""
    params = config.load_params()
    out_dir = Path(config.output_dir)
    if field_value is None:
        field_value = max(config.efield.grid, key=abs)
    with _run("solve", config, params) as manifest:
        with manifest.stage("lattice"):
            lattice = build_domain(config.domain)
        manifest.snapped_depth_nm = lattice.snapped_depth
        with manifest.stage("calibrate"):
            u0, _ = resolve_u0(config, params, lattice)
        manifest.u0_ev = u0
        solver_config = config.solver_config()
        donor = DonorPotentialParams(kappa=config.potential.kappa, u0=u0, donor_site=lattice.donor_index)
        with manifest.stage("assemble"):
            base = assemble(
                lattice,
                params,
                np.zeros(lattice.n_sites),
                spin_orbit=config.hamiltonian.spin_orbit,
                passivation_shift=config.hamiltonian.passivation_shift,
            )

        states: Dict[float, Tuple[Any, np.ndarray]] = {}
        for value in sorted({0.0, float(field_value)}):
            efield = FieldSpec(magnitude=value, direction=config.efield.direction)
            with manifest.stage("solve"):
                solution = lowest_states(
                    base.with_potential(total_potential(donor, lattice, efield)), solver_config.n_states, None, solver_config
                )
            states[value] = (solution, ground_state(solution))

        zero_solution, psi0 = states[0.0]
        reference = contact_density(psi0, lattice.donor_index, params, ALL_ORBITALS)
        if reference.total <= 1e-300:
            raise DegenerateStateError("zero-field state has no weight on the donor site")
        per_field = []
        for value, (solution, psi) in sorted(states.items()):
            contact = contact_density(psi, lattice.donor_index, params, ALL_ORBITALS)
            ratio = contact.total / reference.total
            ratio_s = contact.s_only / reference.s_only if reference.s_only > 0 else 0.0
            levels = spin_levels(g_factor, b0, a0_mhz * ratio * MHZ_TO_EV)
            per_field.append(
                {
                    "field_V_per_um": value,
                    "solution": solution.to_document(),
                    "levels": solution.levels(),
                    "contact_all_orbitals": contact.total,
                    "contact_s_only": contact.s_only,
                    "ratio_all": ratio,
                    "ratio_s": ratio_s,
                    "dipole_nm": dipole_moment(psi, lattice, config.efield.dipole_axis),
                    "spin_levels": levels.to_document(),
                }
            )

        checkpoint = save_checkpoint(
            out_dir / "zero_field.ckpt",
            zero_solution,
            seed=config.solver.seed,
            hashes={"config": config.config_hash, "lattice": lattice.digest(), "tb_params": params.checksum},
        )
        manifest.add_output(checkpoint)

        # cut normal to z through the donor; both Kramers partners give the same site density
        plane = PlaneSpec(kind="plane", axis="z")
        with manifest.stage("maps"):
            zero_map = density_map(psi0, lattice, plane, label="ground density, zero field")
            for path in write_density_map(out_dir, "density_zero", zero_map, {"field_V_per_um": 0.0}, config.config_hash):
                manifest.add_output(path)
            if field_value != 0.0:
                difference = differential_map(
                    states[float(field_value)][1], psi0, lattice, plane, label=f"density change at {field_value:g} V/um"
                )
                meta = {"field_V_per_um": float(field_value)}
                for path in write_density_map(out_dir, "density_difference", difference, meta, config.config_hash):
                    manifest.add_output(path)

        document = {
            "config_hash": config.config_hash,
            "snapped_depth_nm": lattice.snapped_depth,
            "n_sites": lattice.n_sites,
            "u0_ev": u0,
            "s_only_over_all_at_zero": reference.s_only / reference.total if reference.total > 0 else None,
            "spin": {"g": g_factor, "b0_t": b0, "a0_mhz": a0_mhz},
            "fields": per_field,
        }
        manifest.add_output(write_json(out_dir / "solve.json", document))
        return document


def _sweep_document(sweep: Any) -> Dict[str, Any]:
    stark, dipole, diagnostic, problems = analyse_sweep(sweep)
    return {
        "sweep": sweep.to_document(),
        "stark_fit": None if stark is None else stark.to_document(),
        "dipole_fit": None if dipole is None else dipole.to_document(),
        "diagnostic_fit": None if diagnostic is None else diagnostic.to_document(),
        "diagnostics": problems,
    }


def run_sweep_command(config: RunConfig) -> Dict[str, Any]:
    params = config.load_params()
    out_dir = Path(config.output_dir)
    with _run("sweep", config, params) as manifest:
        with manifest.stage("sweep"):
            sweep = run_sweep(config.domain, config.efield.grid, config, params=params, ledger=ledger_path(config))
        manifest.snapped_depth_nm = sweep.depth
        manifest.u0_ev = sweep.u0
        document = _sweep_document(sweep)
        for problem in document["diagnostics"]:
            logger.warning("Sweep fit diagnostic: %s", problem.get("message"))
        for path in write_sweep(out_dir, document, config.config_hash):
            manifest.add_output(path)
        return document


def run_depth_scan_command(config: RunConfig) -> Dict[str, Any]:
    if not config.depths:
        raise PreconditionError("depth-scan needs depths (config depths_nm or --depths)")
    params = config.load_params()
    out_dir = Path(config.output_dir)
    with _run("depth-scan", config, params) as manifest:
        with manifest.stage("depth_scan"):
            scan = depth_scan(config.depths, config.efield.grid, config, params=params, ledger=ledger_path(config))
        manifest.u0_ev = scan.u0
        manifest.extra["snapped_depths_nm"] = [entry.sweep.depth for entry in scan.entries if entry.sweep is not None]
        document = {"config_hash": config.config_hash, **scan.to_document()}
        manifest.add_output(write_json(out_dir / "depth_scan.json", document))
        sweeps = [entry["sweep"] for entry in document["entries"] if entry.get("sweep")]
        if sweeps:
            for path in write_sweep(out_dir, {"sweeps": sweeps}, config.config_hash, name="depth_scan_points"):
                manifest.add_output(path)
        for path in write_figure_csvs(out_dir, document, config.config_hash):
            manifest.add_output(path)
        failed = [entry for entry in scan.entries if entry.error is not None]
        if failed:
            logger.warning("%d of %d depths reported errors", len(failed), len(scan.entries))
        return document


def run_oracle(config: RunConfig) -> Dict[str, Any]:
    """Perturbation dipole slope against the finite-field slope on the same domain."""
    params = config.load_params()
    out_dir = Path(config.output_dir)
    with _run("oracle", config, params) as manifest:
        with manifest.stage("lattice"):
            lattice = build_domain(config.domain)
        manifest.snapped_depth_nm = lattice.snapped_depth
        with manifest.stage("calibrate"):
            u0, _ = resolve_u0(config, params, lattice)
        manifest.u0_ev = u0

        solver_config = config.solver_config()
        solver_config = solver_config.replace(n_states=max(solver_config.n_states, ORACLE_MIN_STATES))
        donor = DonorPotentialParams(kappa=config.potential.kappa, u0=u0, donor_site=lattice.donor_index)
        with manifest.stage("zero_field_solve"):
            h = assemble(
                lattice,
                params,
                total_potential(donor, lattice),
                spin_orbit=config.hamiltonian.spin_orbit,
                passivation_shift=config.hamiltonian.passivation_shift,
            )
            zero = lowest_states(h, solver_config.n_states, None, solver_config)
        prediction = perturbation_dipole(zero, lattice, config.efield.dipole_axis, config.efield.direction)

        with manifest.stage("finite_field_sweep"):
            sweep = run_sweep(config.domain, ORACLE_FIELDS, config, params=params, u0=u0, ledger=ledger_path(config))
        _, dipole, _, problems = analyse_sweep(sweep)
        if dipole is None:
            raise FitError("finite-field dipole fit failed", details={"problems": problems})
        relative = abs(prediction.slope - dipole.slope) / abs(dipole.slope) if dipole.slope != 0 else None
        intercept_match = prediction.intercept == dipole_moment(ground_state(zero), lattice, config.efield.dipole_axis)
        document = {
            "config_hash": config.config_hash,
            "snapped_depth_nm": lattice.snapped_depth,
            "u0_ev": u0,
            "perturbation": prediction.to_document(),
            "finite_field": {"fields_V_per_um": list(ORACLE_FIELDS), **dipole.to_document()},
            "relative_slope_difference": relative,
            "slopes_agree": relative is not None and relative <= ORACLE_AGREEMENT,
            "intercept_matches_zero_field_dipole": intercept_match,
        }
        if not document["slopes_agree"]:
            logger.warning(
                "Perturbation slope %.4e differs from finite-field slope %.4e", prediction.slope, dipole.slope
            )
        manifest.add_output(write_json(out_dir / "oracle.json", document))
        return document


def dense_check_domain(config: RunConfig) -> DomainSpec:
    """Cube of DENSE_CHECK_CELLS conventional cells (64 sites for 2) with the donor mid-depth."""
    a = config.domain.lattice_constant
    extent = DENSE_CHECK_CELLS * a
    return DomainSpec(
        extents=(extent, extent, extent),
        impurity_depth=extent / 2.0,
        lattice_constant=a,
        depth_axis=config.domain.depth_axis,
    )


def run_dense_check(config: RunConfig) -> Dict[str, Any]:
    params = config.load_params()
    out_dir = Path(config.output_dir)
    with _run("dense-check", config, params) as manifest:
        spec = dense_check_domain(config)
        lattice = build_domain(spec)
        manifest.snapped_depth_nm = lattice.snapped_depth
        u0 = config.potential.u0 if config.potential.u0 is not None else settings.physics.u0_ev
        manifest.u0_ev = u0
        donor = DonorPotentialParams(kappa=config.potential.kappa, u0=u0, donor_site=lattice.donor_index)
        h = assemble(
            lattice,
            params,
            total_potential(donor, lattice),
            spin_orbit=config.hamiltonian.spin_orbit,
            passivation_shift=config.hamiltonian.passivation_shift,
        )
        solver_config = config.solver_config().replace(max_basis=h.dimension, window_halfwidth=None)
        with manifest.stage("lanczos"):
            krylov = lowest_states(h, solver_config.n_states, None, solver_config)
        with manifest.stage("dense"):
            full = dense_diagonalize(h)
        reference = nearest_states(full, float(krylov.sigma), krylov.n_states)
        deviation = float(np.max(np.abs(krylov.eigenvalues - reference.eigenvalues)))
        singular = np.linalg.svd(reference.eigenvectors.conj().T @ krylov.eigenvectors, compute_uv=False)
        overlap = float(singular.min())
        passed = deviation <= DENSE_CHECK_TOLERANCE and overlap > DENSE_CHECK_OVERLAP
        document = {
            "config_hash": config.config_hash,
            "n_sites": lattice.n_sites,
            "dimension": h.dimension,
            "lanczos_ev": [float(v) for v in krylov.eigenvalues],
            "dense_ev": [float(v) for v in reference.eigenvalues],
            "max_abs_eigenvalue_difference_ev": deviation,
            "min_subspace_overlap": overlap,
            "status": "PASS" if passed else "FAIL",
        }
        manifest.extra["dense_check"] = document["status"]
        manifest.add_output(write_json(out_dir / "dense_check.json", document))
        if not passed:
            logger.error("Dense check failed: max |dE| %.3e eV, min overlap %.12f", deviation, overlap)
        return document


def _figure_series(frame: pd.DataFrame, x: str, y: str, error: Optional[str] = None) -> List[Series]:
    if x == "depth":
        if frame.empty:
            return []
        ordered = frame.sort_values("depth")
        return [
            Series(
                label=y,
                x=ordered["depth"].to_numpy(),
                y=ordered[y].to_numpy(),
                error=None if error is None else ordered[error].to_numpy(),
            )
        ]
    return series_by_depth(frame, x, y, error)


FIGURE_PANELS = {
    "fig1a": ("field", "dA_over_A0", None, "Hyperfine change with field", "field (V/um)", "dA/A0"),
    "fig1b": ("depth", "eta2", "eta2_sigma", "Quadratic Stark coefficient", "depth (nm)", "eta2 (um^2/V^2)"),
    "fig1c": ("field", "dipole_nm", None, "Dipole moment with field", "field (V/um)", "dipole (nm)"),
    "fig1d": ("depth", "dipole_slope", None, "Dipole slope with depth", "depth (nm)", "slope (nm per V/um)"),
}


def run_plot(config: RunConfig, source: Optional[Path] = None) -> Dict[str, Any]:
    """Figure CSVs and SVGs from a finished depth scan plus heatmaps of any density maps."""
    out_dir = Path(config.output_dir)
    scan_path = Path(source) if source is not None else out_dir / "depth_scan.json"
    with _run("plot", config) as manifest:
        if not scan_path.exists():
            raise PreconditionError("no depth-scan document to plot", details={"path": str(scan_path)})
        scan = read_json(scan_path)
        config_hash = scan.get("config_hash", config.config_hash)
        manifest.extra["source"] = str(scan_path)
        manifest.extra["source_config_hash"] = config_hash
        for path in write_figure_csvs(out_dir, scan, config_hash):
            manifest.add_output(path)
        frames = figure_frames(scan)
        for name, (x, y, error, title, x_label, y_label) in FIGURE_PANELS.items():
            chart = line_chart(_figure_series(frames[name], x, y, error), title, x_label, y_label)
            if name == "fig1b":
                eta1 = _figure_series(frames[name], "depth", "eta1", "eta1_sigma")
                write_svg(out_dir / "fig1b_eta1.svg", line_chart(eta1, "Linear Stark coefficient", x_label, "eta1 (um/V)"))
                manifest.add_output(out_dir / "fig1b_eta1.svg")
            manifest.add_output(write_svg(out_dir / f"{name}.svg", chart))

        for density_csv in sorted(out_dir.glob("density_*.csv")):
            _, frame = read_csv(density_csv)
            root = heatmap(
                frame["x_nm"].to_numpy(),
                frame["y_nm"].to_numpy(),
                frame["value"].to_numpy(),
                density_csv.stem.replace("_", " "),
                "x (nm)",
                "y (nm)",
            )
            manifest.add_output(write_svg(density_csv.with_suffix(".svg"), root))
        return {"source": str(scan_path), "outputs": sorted(set(manifest.outputs))}


COMMANDS = {
    "bands": run_bands,
    "calibrate": run_calibrate,
    "solve": run_solve,
    "sweep": run_sweep_command,
    "depth-scan": run_depth_scan_command,
    "oracle": run_oracle,
    "dense-check": run_dense_check,
    "plot": run_plot,
}


__all__ = [
    "COMMANDS",
    "dense_check_domain",
    "ledger_path",
    "run_bands",
    "run_calibrate",
    "run_dense_check",
    "run_depth_scan_command",
    "run_oracle",
    "run_plot",
    "run_solve",
    "run_sweep_command",
]
