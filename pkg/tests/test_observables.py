from __future__ import annotations

import numpy as np
import pytest

from src.errors import DegenerateStateError, MapRangeError, PreconditionError
from src.observables.contact import (
    S_ONLY,
    contact_density,
    contact_ratio,
    dipole_moment,
    level_density,
    position_matrix,
    site_probabilities,
)
from src.observables.density import PlaneSpec, density_map, differential_map, select_sites
from src.solver.dense import dense_diagonalize


def _localized(lattice, params, site, orbital, spin=0, amplitude=1.0):
    psi = np.zeros(lattice.n_sites * params.n_basis, dtype=np.complex128)
    psi[site * params.n_basis + spin * params.n_orbitals + params.orbital_index(orbital)] = amplitude
    return psi


def _normalised(rng, size):
    psi = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return psi / np.linalg.norm(psi)


def test_contact_density_of_a_donor_s_orbital(tiny_lattice, params):
    psi = _localized(tiny_lattice, params, tiny_lattice.donor_index, "s", spin=1, amplitude=1j)
    contact = contact_density(psi, tiny_lattice.donor_index, params)
    assert contact.total == pytest.approx(1.0)
    assert contact.s_only == pytest.approx(1.0)


def test_s_only_mode_ignores_p_weight(tiny_lattice, params):
    psi = _localized(tiny_lattice, params, tiny_lattice.donor_index, "pz")
    contact = contact_density(psi, tiny_lattice.donor_index, params, S_ONLY)
    assert contact.total == pytest.approx(1.0)
    assert contact.value == 0.0


def test_contact_requires_a_normalised_state(tiny_lattice, params):
    psi = _localized(tiny_lattice, params, tiny_lattice.donor_index, "s", amplitude=2.0)
    with pytest.raises(PreconditionError):
        contact_density(psi, tiny_lattice.donor_index, params)


def test_contact_ratio_ignores_global_phase(tiny_lattice, params, rng):
    psi = _normalised(rng, tiny_lattice.n_sites * params.n_basis)
    ratio = contact_ratio(np.exp(0.7j) * psi, psi, tiny_lattice.donor_index, params=params)
    assert ratio == pytest.approx(1.0)


def test_contact_ratio_with_an_empty_donor_site(tiny_lattice, params):
    other = (tiny_lattice.donor_index + 1) % tiny_lattice.n_sites
    psi_zero = _localized(tiny_lattice, params, other, "s")
    psi_field = _localized(tiny_lattice, params, tiny_lattice.donor_index, "s")
    with pytest.raises(DegenerateStateError):
        contact_ratio(psi_field, psi_zero, tiny_lattice.donor_index, params=params)


def test_dipole_of_a_state_split_between_two_sites(tiny_lattice, params):
    donor = tiny_lattice.donor_index
    depth = tiny_lattice.positions[:, 1]
    far = int(np.argmax(np.abs(depth - depth[donor])))
    psi = (_localized(tiny_lattice, params, donor, "s") + _localized(tiny_lattice, params, far, "px")) / np.sqrt(2.0)
    expected = 0.5 * (depth[far] - depth[donor])
    assert dipole_moment(psi, tiny_lattice, "y") == pytest.approx(expected)
    assert dipole_moment(psi, tiny_lattice, (0.0, 2.0, 0.0)) == pytest.approx(expected)
    assert dipole_moment(psi, tiny_lattice, "y", origin=0.0) == pytest.approx(0.5 * (depth[far] + depth[donor]))


def test_position_matrix_diagonal_is_the_dipole(tiny_lattice, params, rng):
    psi = _normalised(rng, tiny_lattice.n_sites * params.n_basis)
    matrix = position_matrix(psi[:, None], psi[:, None], tiny_lattice, "y")
    assert matrix.shape == (1, 1)
    assert matrix[0, 0].real == pytest.approx(dipole_moment(psi, tiny_lattice, "y"))
    assert abs(matrix[0, 0].imag) < 1e-12


def test_plane_cut_through_the_donor(tiny_lattice, params, rng):
    indices, snapped = select_sites(tiny_lattice, PlaneSpec(kind="plane", axis="z"))
    assert tiny_lattice.donor_index in indices
    assert snapped == pytest.approx(tiny_lattice.donor_position[2])
    np.testing.assert_allclose(tiny_lattice.positions[indices, 2], snapped)
    psi = _normalised(rng, tiny_lattice.n_sites * params.n_basis)
    full = density_map(psi, tiny_lattice, PlaneSpec(kind="full"))
    assert full.size == tiny_lattice.n_sites
    assert full.values.sum() == pytest.approx(1.0)
    assert full.domain_total == pytest.approx(1.0)


def test_line_cut_is_ordered_along_the_axis(tiny_lattice):
    indices, snapped = select_sites(tiny_lattice, PlaneSpec(kind="line", axis="y"))
    assert snapped is None
    assert tiny_lattice.donor_index in indices
    assert np.all(np.diff(tiny_lattice.positions[indices, 1]) > 0)


def test_cut_outside_the_domain_is_rejected(tiny_lattice):
    with pytest.raises(MapRangeError):
        select_sites(tiny_lattice, PlaneSpec(kind="plane", axis="x", offset=5.0))


def test_plane_spec_validates_its_fields():
    with pytest.raises(PreconditionError):
        PlaneSpec(kind="slab")
    with pytest.raises(PreconditionError):
        PlaneSpec(axis="w")


def test_differential_map_conserves_probability(tiny_lattice, params, rng):
    size = tiny_lattice.n_sites * params.n_basis
    psi_zero, psi_field = _normalised(rng, size), _normalised(rng, size)
    difference = differential_map(psi_field, psi_zero, tiny_lattice, PlaneSpec(kind="full"))
    assert difference.values.sum() == pytest.approx(0.0, abs=1e-12)
    expected = site_probabilities(psi_field, params.n_basis) - site_probabilities(psi_zero, params.n_basis)
    np.testing.assert_allclose(difference.values, expected)


def test_kramers_partners_share_one_site_density(tiny_hamiltonian, params):
    solution = dense_diagonalize(tiny_hamiltonian)
    ground = solution.ground_level()
    averaged = level_density(solution, ground, params.n_basis)
    for index in ground:
        np.testing.assert_allclose(site_probabilities(solution.vector(index), params.n_basis), averaged, atol=1e-10)
    assert averaged.sum() == pytest.approx(1.0)
