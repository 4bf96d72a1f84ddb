from __future__ import annotations

import numpy as np
import pytest

from src.db.repository import COMPLETE, INCOMPLETE, fetch_points, fetch_status
from src.errors import FitError, IonizationError, PreconditionError, SweepAbortedError
from src.observables.contact import dipole_moment, ground_state
from src.outputs.files import write_sweep
from src.potentials.donor import DonorPotentialParams, FieldSpec, total_potential
from src.solver.dense import dense_diagonalize
from src.solver.lanczos import EigenSolution
from src.stark import sweep as sweep_module
from src.stark.fit import fit_coefficients, fit_diagnostic, fit_dipole
from src.stark.perturbation import perturbation_dipole
from src.stark.spin import BOHR_MAGNETON_EV_T, spin_levels
from src.stark.sweep import analyse_sweep, depth_scan, run_sweep

GRID = np.linspace(-1.0, 1.0, 9)


def test_fit_recovers_exact_coefficients():
    delta = -3.7e-3 * GRID**2 + 1.2e-4 * GRID
    fit = fit_coefficients(GRID, delta)
    assert fit.eta2 == pytest.approx(-3.7e-3, rel=1e-10)
    assert fit.eta1 == pytest.approx(1.2e-4, rel=1e-10)
    assert fit.rms_residual < 1e-15
    assert not fit.anomaly
    assert fit.peak_field == pytest.approx(1.2e-4 / (2 * 3.7e-3))


def test_fit_uncertainty_covers_the_truth(rng):
    fields = np.linspace(-1.0, 1.0, 21)
    clean = -3.7e-3 * fields**2 + 2.0e-4 * fields
    covered = 0
    trials = 1000
    for _ in range(trials):
        fit = fit_coefficients(fields, clean + rng.normal(0.0, 1e-4, fields.size))
        covered += abs(fit.eta2 + 3.7e-3) <= 3.0 * fit.eta2_sigma
    assert covered / trials >= 0.97


def test_fit_scales_with_the_field_unit():
    delta = -3.7e-3 * GRID**2 + 1.2e-4 * GRID
    scaled = fit_coefficients(2.0 * GRID, delta)
    assert scaled.eta2 == pytest.approx(-3.7e-3 / 4.0, rel=1e-10)
    assert scaled.eta1 == pytest.approx(1.2e-4 / 2.0, rel=1e-10)


def test_positive_curvature_is_flagged():
    fit = fit_coefficients(GRID, 1e-3 * GRID**2)
    assert fit.anomaly


def test_fit_needs_enough_distinct_fields():
    with pytest.raises(FitError):
        fit_coefficients([-1.0, 0.0, 1.0], [0.1, 0.0, 0.1])


def test_fit_needs_the_zero_field():
    with pytest.raises(FitError):
        fit_coefficients([-1.0, -0.5, 0.5, 1.0, 1.5], [0.0] * 5)


def test_rank_deficient_design_is_rejected():
    with pytest.raises(FitError):
        fit_diagnostic([0.0, 1.0, 0.0, 1.0], [0.0, 0.1, 0.0, 0.1])


def test_diagnostic_constant_is_near_zero_for_clean_data():
    delta = -3.7e-3 * GRID**2 + 1.2e-4 * GRID
    diagnostic = fit_diagnostic(GRID, delta)
    assert diagnostic.constant == pytest.approx(0.0, abs=1e-14)


def test_dipole_fit_is_a_straight_line():
    fit = fit_dipole(GRID, 0.3 - 0.02 * GRID)
    assert fit.slope == pytest.approx(-0.02)
    assert fit.intercept == pytest.approx(0.3)
    assert fit.r_squared == pytest.approx(1.0)


def test_spin_levels_without_fields_are_degenerate():
    levels = spin_levels(1.9985, 0.0, 0.0)
    assert set(levels.energies.values()) == {0.0}


def test_zeeman_only_levels_form_doublets():
    levels = spin_levels(2.0, 0.35, 0.0)
    zeeman = 2.0 * BOHR_MAGNETON_EV_T * 0.35
    assert levels.energy(0.5, 0.5) == levels.energy(0.5, -0.5) == pytest.approx(zeeman / 2)
    assert levels.energy(-0.5, 0.5) == levels.energy(-0.5, -0.5) == pytest.approx(-zeeman / 2)


def test_esr_lines_are_split_by_the_hyperfine_constant():
    a = 4.86e-7
    first, second = spin_levels(1.9985, 0.35, a).esr_transitions
    assert first - second == pytest.approx(a, rel=1e-9)


def test_negative_magnetic_field_is_rejected():
    with pytest.raises(PreconditionError):
        spin_levels(2.0, -0.1, 0.0)


def _ground_dipole(hamiltonian, donor, lattice, field):
    h = hamiltonian.with_potential(total_potential(donor, lattice, field))
    return dipole_moment(ground_state(dense_diagonalize(h)), lattice, "y")


def test_perturbation_slope_matches_finite_differences(tiny_hamiltonian, tiny_lattice):
    direction = (0.0, -1.0, 0.0)
    spectrum = dense_diagonalize(tiny_hamiltonian)
    prediction = perturbation_dipole(spectrum, tiny_lattice, "y", field_direction=direction)
    assert prediction.slope > 0.0
    assert prediction.states_used == spectrum.n_states - 2
    assert prediction.intercept == pytest.approx(dipole_moment(ground_state(spectrum), tiny_lattice, "y"))

    donor = DonorPotentialParams(kappa=11.9, u0=4.33, donor_site=tiny_lattice.donor_index)
    step = 1e-2
    upper = _ground_dipole(tiny_hamiltonian, donor, tiny_lattice, FieldSpec(step, direction))
    lower = _ground_dipole(tiny_hamiltonian, donor, tiny_lattice, FieldSpec(-step, direction))
    assert (upper - lower) / (2 * step) == pytest.approx(prediction.slope, rel=1e-4)


def test_default_field_direction_gives_a_positive_slope(tiny_config, tiny_hamiltonian, tiny_lattice):
    assert tiny_config.efield.direction == (0.0, -1.0, 0.0)
    assert FieldSpec(1.0).direction == tiny_config.efield.direction
    spectrum = dense_diagonalize(tiny_hamiltonian)
    prediction = perturbation_dipole(spectrum, tiny_lattice, "y", field_direction=tiny_config.efield.direction)
    assert prediction.slope > 0.0


def test_perturbation_needs_excited_states(tiny_hamiltonian, tiny_lattice):
    spectrum = dense_diagonalize(tiny_hamiltonian)
    single = EigenSolution(
        eigenvalues=spectrum.eigenvalues[:1],
        eigenvectors=spectrum.eigenvectors[:, :1],
        residuals=spectrum.residuals[:1],
        iterations=1,
        ortho_defect=0.0,
        tolerance=spectrum.tolerance,
    )
    with pytest.raises(PreconditionError):
        perturbation_dipole(single, tiny_lattice)


def test_zero_field_only_sweep_reports_fit_problems(tiny_config, params):
    sweep = run_sweep(tiny_config.domain, [0.0], tiny_config, params=params, u0=4.33)
    assert sweep.complete
    assert sweep.ratios.tolist() == [1.0]
    stark, dipole, _, problems = analyse_sweep(sweep)
    assert stark is None and dipole is None
    assert [problem["error"] for problem in problems] == ["fit", "fit"]


def test_sweep_ratios_stay_near_one_for_weak_fields(tiny_config, params):
    sweep = run_sweep(tiny_config.domain, tiny_config.efield.grid, tiny_config, params=params, u0=4.33)
    assert sweep.fields.tolist() == list(tiny_config.efield.grid)
    assert sweep.ratios[2] == 1.0
    np.testing.assert_allclose(sweep.ratios, 1.0, atol=1e-2)
    assert sweep.depth == pytest.approx(sweep.metadata["domain"]["impurity_depth_nm"], abs=0.5431 / 8 + 1e-12)
    stark, dipole, diagnostic, problems = analyse_sweep(sweep)
    assert problems == []
    assert stark.n_points == 5
    assert dipole is not None and diagnostic is not None


def test_sweep_grid_without_zero_is_rejected(tiny_config, params):
    with pytest.raises(PreconditionError):
        run_sweep(tiny_config.domain, [0.1, 0.2], tiny_config, params=params, u0=4.33)


def test_ledger_points_are_reused(tiny_config, params, tmp_path):
    ledger = tmp_path / "ledger.sqlite"
    first = run_sweep(tiny_config.domain, tiny_config.efield.grid, tiny_config, params=params, u0=4.33, ledger=ledger)
    assert first.metadata["cached_points"] == 0
    assert len(fetch_points(ledger, first.run_hash, first.depth)) == 5
    assert fetch_status(ledger, first.run_hash, first.depth) == COMPLETE

    second = run_sweep(tiny_config.domain, tiny_config.efield.grid, tiny_config, params=params, u0=4.33, ledger=ledger)
    assert second.metadata["cached_points"] == 5
    assert second.run_hash == first.run_hash
    np.testing.assert_array_equal(second.ratios, first.ratios)
    np.testing.assert_array_equal(second.dipoles, first.dipoles)


def test_failed_point_aborts_and_resumes(monkeypatch, tiny_config, params, tmp_path):
    ledger = tmp_path / "ledger.sqlite"
    original = sweep_module._PointSolver.solve_point

    def flaky(self, value):
        if value == 0.1:
            raise IonizationError("synthetic failure", details={"field_V_per_um": value})
        return original(self, value)

    monkeypatch.setattr(sweep_module._PointSolver, "solve_point", flaky)
    with pytest.raises(SweepAbortedError) as excinfo:
        run_sweep(tiny_config.domain, tiny_config.efield.grid, tiny_config, params=params, u0=4.33, ledger=ledger)
    partial = excinfo.value.partial
    assert not partial.complete
    assert 0.1 not in partial.fields.tolist()
    assert 0.0 in partial.fields.tolist()
    assert excinfo.value.details["cause"]["error"] == "ionization"
    assert fetch_status(ledger, partial.run_hash, partial.depth) == INCOMPLETE

    monkeypatch.setattr(sweep_module._PointSolver, "solve_point", original)
    resumed = run_sweep(tiny_config.domain, tiny_config.efield.grid, tiny_config, params=params, u0=4.33, ledger=ledger)
    assert resumed.complete
    assert resumed.metadata["cached_points"] == len(partial.points)
    assert resumed.fields.tolist() == list(tiny_config.efield.grid)
    assert fetch_status(ledger, resumed.run_hash, resumed.depth) == COMPLETE


def test_worker_count_does_not_change_the_output(tiny_config, params, tmp_path):
    written = []
    for workers in (1, 2):
        config = tiny_config.with_overrides(workers=workers)
        sweep = run_sweep(config.domain, config.efield.grid, config, params=params, u0=4.33)
        _, csv_path = write_sweep(tmp_path / f"w{workers}", {"sweep": sweep.to_document()}, config.config_hash)
        written.append(csv_path.read_bytes())
    assert written[0] == written[1]


def test_depth_scan_records_each_depth(tiny_config, params):
    scan = depth_scan([0.3, 0.8], tiny_config.efield.grid, tiny_config, params=params, u0=4.33)
    assert [entry.depth for entry in scan.entries] == [0.3, 0.8]
    assert all(entry.ok for entry in scan.entries)
    document = scan.to_document()
    assert document["u0_ev"] == 4.33
    assert document["trends"]["depths_nm"] == [0.3, 0.8]
    assert {"sweep", "stark_fit", "dipole_fit"} <= set(document["entries"][0])


def _scan_summary(scan):
    return [
        (
            entry.depth,
            entry.sweep.depth,
            entry.sweep.delta_A_over_A0.tolist(),
            entry.sweep.dipoles.tolist(),
            entry.stark_fit.to_document(),
        )
        for entry in scan.entries
    ]


def test_depth_scan_worker_count_does_not_change_the_result(tiny_config, params):
    summaries = []
    for workers in (1, 2):
        config = tiny_config.with_overrides(workers=workers)
        scan = depth_scan([0.8, 0.3], config.efield.grid, config, params=params, u0=4.33)
        summaries.append((_scan_summary(scan), scan.trends))
    assert [entry[0] for entry in summaries[0][0]] == [0.3, 0.8]
    assert summaries[0] == summaries[1]


def test_depths_on_the_same_plane_are_scanned_once(tiny_config, params, caplog):
    with caplog.at_level("WARNING", logger="src.stark.sweep"):
        scan = depth_scan([0.28, 0.27, 0.8], tiny_config.efield.grid, tiny_config, params=params, u0=4.33)
    assert [entry.depth for entry in scan.entries] == [0.27, 0.8]
    assert scan.trends["depths_nm"] == [0.27, 0.8]
    assert any("snaps to the plane" in record.getMessage() for record in caplog.records)


def test_depth_scan_rejects_depths_outside_the_range(tiny_config, params):
    with pytest.raises(PreconditionError):
        depth_scan([1.05], tiny_config.efield.grid, tiny_config, params=params, u0=4.33)
