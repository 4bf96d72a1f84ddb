from __future__ import annotations

import numpy as np
import pytest

from src.errors import DomainSpecError, DomainTooSmallError
from src.lattice.domain import DONOR, HOST, DomainSpec, build_domain

A = 0.5431


def test_site_count_matches_closed_form():
    spec = DomainSpec(extents=(2 * A, 3 * A, 2 * A), impurity_depth=1.0)
    lattice = build_domain(spec)
    assert lattice.n_sites == 8 * 2 * 3 * 2 == spec.closed_form_site_count()


def test_extent_below_one_cell_is_rejected():
    with pytest.raises(DomainTooSmallError):
        build_domain(DomainSpec(extents=(0.5 * A, 2 * A, 2 * A), impurity_depth=0.5))


@pytest.mark.parametrize("depth", [0.0, -1.0, 2 * A, 5.0])
def test_depth_outside_the_slab_is_rejected(depth):
    with pytest.raises(DomainSpecError):
        DomainSpec(extents=(2 * A, 2 * A, 2 * A), impurity_depth=depth)


def test_donor_snaps_to_nearest_atomic_plane():
    spec = DomainSpec(extents=(3 * A, 4 * A, 3 * A), impurity_depth=1.03)
    lattice = build_domain(spec)
    quarter = A / 4.0
    assert lattice.snapped_depth / quarter == pytest.approx(round(lattice.snapped_depth / quarter))
    assert abs(lattice.snapped_depth - 1.03) <= quarter / 2.0 + 1e-12
    assert lattice.requested_depth == 1.03
    assert lattice.site(lattice.donor_index).species == DONOR
    other = (lattice.donor_index + 1) % lattice.n_sites
    assert lattice.site(other).species == HOST


def test_donor_is_laterally_centred():
    spec = DomainSpec(extents=(4 * A, 4 * A, 4 * A), impurity_depth=2 * A)
    lattice = build_domain(spec)
    lateral = lattice.donor_position[[0, 2]]
    assert np.all(np.abs(lateral - 2 * A) <= A / 2.0)


def test_neighbour_table_is_symmetric_with_opposite_cosines():
    lattice = build_domain(DomainSpec(extents=(2 * A, 2 * A, 2 * A), impurity_depth=A))
    for index in range(lattice.n_sites):
        for neighbour, cosines in lattice.neighbors_of(index):
            back = dict(lattice.neighbors_of(neighbour))
            assert index in back
            np.testing.assert_allclose(back[index], -np.asarray(cosines), atol=1e-15)
            bond = lattice.positions[neighbour] - lattice.positions[index]
            assert np.linalg.norm(bond) == pytest.approx(lattice.spec.bond_length)


def test_surface_sites_miss_bonds_and_interior_sites_do_not():
    lattice = build_domain(DomainSpec(extents=(3 * A, 3 * A, 3 * A), impurity_depth=1.5 * A))
    counts = np.count_nonzero(lattice.neighbors >= 0, axis=1)
    np.testing.assert_array_equal(lattice.is_surface, counts < 4)
    assert counts.min() >= 1
    assert np.any(~lattice.is_surface)
    surface = int(np.flatnonzero(lattice.is_surface)[0])
    assert len(lattice.missing_bond_cosines(surface)) == 4 - counts[surface]
    assert lattice.bond_count() == int(counts.sum()) // 2


def test_digest_is_stable_and_tracks_the_donor():
    spec = DomainSpec(extents=(2 * A, 3 * A, 2 * A), impurity_depth=0.6)
    assert build_domain(spec).digest() == build_domain(spec).digest()
    moved = DomainSpec(extents=(2 * A, 3 * A, 2 * A), impurity_depth=1.2)
    assert build_domain(moved).digest() != build_domain(spec).digest()


def test_depth_axis_can_be_changed():
    spec = DomainSpec(extents=(2 * A, 2 * A, 4 * A), impurity_depth=1.5, depth_axis="z")
    lattice = build_domain(spec)
    assert lattice.snapped_depth == pytest.approx(lattice.donor_position[2])


def test_bond_count_matches_a_pairwise_distance_scan(cube_lattice, cube_bonds):
    assert cube_lattice.n_sites == 64
    assert cube_lattice.bond_count() == len(cube_bonds)
    table = {
        (min(i, j), max(i, j))
        for i in range(cube_lattice.n_sites)
        for j, _ in cube_lattice.neighbors_of(i)
    }
    assert table == cube_bonds


def test_interior_sites_of_the_cube_have_four_neighbours(cube_lattice, cube_bonds):
    counts = np.zeros(cube_lattice.n_sites, dtype=int)
    for i, j in cube_bonds:
        counts[i] += 1
        counts[j] += 1
    assert counts.max() == 4
    np.testing.assert_array_equal(counts, np.count_nonzero(cube_lattice.neighbors >= 0, axis=1))


def test_donor_is_equidistant_from_both_depth_faces(cube_lattice):
    spec = cube_lattice.spec
    extent = spec.extents[spec.axis_index]
    depth = cube_lattice.snapped_depth
    assert abs(depth - (extent - depth)) <= spec.bond_length / 2.0
    planes = np.unique(np.round(cube_lattice.positions[:, spec.axis_index], 12))
    assert depth == pytest.approx(planes[np.argmin(np.abs(planes - extent / 2.0))])
