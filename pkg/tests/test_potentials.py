from __future__ import annotations

import math

import numpy as np
import pytest

from src.config.settings import DATA_DIR
from src.errors import CalibrationError, PreconditionError, SchemaError
from src.potentials.calibration import calibrate_u0, conduction_edge, donor_binding, find_u0
from src.potentials.core import bmb_core_potential, core_potential_table, load_core_params, load_core_params_file
from src.potentials.donor import (
    COULOMB_EV_NM,
    DonorPotentialParams,
    FieldSpec,
    donor_potential,
    field_potential,
    total_potential,
)

CORE_PATH = DATA_DIR / "bmb_core_pantelides.json"


def test_donor_site_carries_the_central_cell_energy(tiny_lattice):
    params = DonorPotentialParams(kappa=11.9, u0=4.33, donor_site=tiny_lattice.donor_index)
    potential = donor_potential(params, tiny_lattice)
    assert potential[tiny_lattice.donor_index] == -4.33
    other = (tiny_lattice.donor_index + 3) % tiny_lattice.n_sites
    distance = np.linalg.norm(tiny_lattice.positions[other] - tiny_lattice.donor_position)
    assert potential[other] == pytest.approx(-COULOMB_EV_NM / (11.9 * distance))
    assert np.all(potential < 0)


def test_coulomb_constant_in_ev_nm():
    assert COULOMB_EV_NM == pytest.approx(1.439964, rel=1e-5)


@pytest.mark.parametrize("kappa", [1.0, 0.5, math.inf])
def test_kappa_must_exceed_one(kappa):
    with pytest.raises(PreconditionError):
        DonorPotentialParams(kappa=kappa, u0=1.0, donor_site=0)


def test_field_term_is_linear_and_vanishes_at_the_donor(tiny_lattice):
    field = FieldSpec(magnitude=2.0, direction=(0.0, 1.0, 0.0))
    linear = field_potential(field, tiny_lattice)
    assert linear[tiny_lattice.donor_index] == 0.0
    depth_offset = tiny_lattice.positions[:, 1] - tiny_lattice.donor_position[1]
    np.testing.assert_allclose(linear, 2.0e-3 * depth_offset, atol=1e-15)
    doubled = field_potential(field.with_magnitude(4.0), tiny_lattice)
    np.testing.assert_allclose(doubled, 2.0 * linear, atol=1e-15)


def test_total_potential_adds_the_field(tiny_lattice):
    params = DonorPotentialParams(kappa=11.9, u0=4.33, donor_site=tiny_lattice.donor_index)
    field = FieldSpec.along_axis(1.5, "y", sign=-1.0)
    np.testing.assert_allclose(
        total_potential(params, tiny_lattice, field),
        donor_potential(params, tiny_lattice) + field_potential(field, tiny_lattice),
    )
    np.testing.assert_array_equal(
        total_potential(params, tiny_lattice, field.with_magnitude(0.0)), donor_potential(params, tiny_lattice)
    )


def test_gauge_origin_shifts_the_field_term_by_a_constant(tiny_lattice):
    at_donor = FieldSpec(magnitude=1.0)
    at_zero = FieldSpec(magnitude=1.0, gauge_origin=(0.0, 0.0, 0.0))
    shift = field_potential(at_zero, tiny_lattice) - field_potential(at_donor, tiny_lattice)
    np.testing.assert_allclose(shift, shift[0])


def test_non_unit_direction_is_rejected():
    with pytest.raises(PreconditionError):
        FieldSpec(magnitude=1.0, direction=(0.0, 2.0, 0.0))


def test_core_potential_limits():
    core = load_core_params_file(CORE_PATH)
    assert bmb_core_potential(core, 0.0) == 0.0
    limit = (core.kappa - 1.0) / (math.pi**2 * core.kappa)
    assert bmb_core_potential(core, 1e7) == pytest.approx(limit, rel=1e-6)
    table = core_potential_table(core, np.linspace(0.0, 50.0, 11))
    assert table.shape == (11, 2)
    np.testing.assert_allclose(table[:, 0], np.linspace(0.0, 50.0, 11))


def test_core_potential_rejects_negative_wavenumbers():
    core = load_core_params_file(CORE_PATH)
    with pytest.raises(SchemaError):
        bmb_core_potential(core, np.array([1.0, -1.0]))


def test_core_document_with_unknown_key_names_it():
    document = {"kappa": 11.9, "zeta": 0.5, "alpha_per_nm": 1.0, "beta_per_nm": 2.0, "gamma_per_nm": 3.0, "delta": 1}
    with pytest.raises(SchemaError) as excinfo:
        load_core_params(document)
    assert excinfo.value.field == "delta"


def test_core_zeta_outside_unit_interval_is_rejected():
    document = {"kappa": 11.9, "zeta": 1.2, "alpha_per_nm": 1.0, "beta_per_nm": 2.0, "gamma_per_nm": 3.0}
    with pytest.raises(SchemaError):
        load_core_params(document)


def test_find_u0_recovers_a_linear_binding_curve():
    u0, binding, trace = find_u0(lambda u: 0.01 * u, 0.0456)
    assert u0 == pytest.approx(4.56, abs=5e-3)
    assert binding == pytest.approx(0.0456, abs=5e-5)
    assert trace[-1]["u0_ev"] == u0
    assert len(trace) <= 30


def test_find_u0_handles_a_saturating_curve():
    u0, _, _ = find_u0(lambda u: 0.1 * (1.0 - math.exp(-u / 3.0)), 0.05, tolerance=1e-9)
    assert u0 == pytest.approx(3.0 * math.log(2.0), abs=1e-6)


def test_unreachable_target_raises_with_the_trace():
    with pytest.raises(CalibrationError) as excinfo:
        find_u0(lambda u: 0.01 * u, 1.0)
    assert len(excinfo.value.trace) == 5


def test_bracket_must_increase():
    with pytest.raises(PreconditionError):
        find_u0(lambda u: u, 0.1, bracket=(5.0, 1.0))


def test_calibration_reproduces_a_known_binding(tiny_lattice, params, exact_solver):
    # half the spectrum guarantees states above the valence-band top
    solver = exact_solver.replace(n_states=160)
    edge = conduction_edge(tiny_lattice, params, solver)
    target, _, _ = donor_binding(tiny_lattice, params, 2.5, solver, e_cbm=edge)
    result = calibrate_u0(tiny_lattice, params, target, solver, bracket=(0.0, 5.0), tolerance=1e-12)
    assert result.u0 == pytest.approx(2.5)
    assert result.binding == pytest.approx(target, abs=1e-12)
    assert result.e_cbm == edge
    assert result.to_document()["iterations"] == len(result.trace)


def test_calibration_rejects_unknown_references(tiny_lattice, params, exact_solver):
    with pytest.raises(PreconditionError):
        conduction_edge(tiny_lattice, params, exact_solver, cbm_reference="vacuum")
