from __future__ import annotations

import json

import numpy as np
import pytest

from src.config.settings import DATA_DIR
from src.errors import ChecksumError, PreconditionError, SchemaError
from src.tb.bands import SYMMETRY_POINTS, bloch_hamiltonian, bulk_bands, k_path_from_route
from src.tb.blocks import canonical_sk_matrix, hybrid_projector, onsite_block, sk_block, spin_orbit_block
from src.tb.params import compute_checksum, load_params, load_params_file, save_params

PARAMS_PATH = DATA_DIR / "si_sp3d5s_boykin2004.json"
S, X, Y, Z, YZ, ZX, XY, X2, Z2, SS = range(10)


def _raw_document():
    return json.loads(PARAMS_PATH.read_text(encoding="utf-8"))


def test_saved_parameters_reload_with_the_same_checksum(params, tmp_path):
    target = save_params(params, tmp_path / "params.json")
    reloaded = load_params_file(target)
    assert reloaded.checksum == params.checksum
    assert reloaded.onsite_energies == params.onsite_energies
    assert json.loads(target.read_text(encoding="utf-8"))["checksum"] == compute_checksum(
        json.loads(target.read_text(encoding="utf-8"))
    )


def test_tampered_checksum_is_rejected():
    document = _raw_document()
    document["checksum"] = compute_checksum(document)
    document["sk_integrals"]["ppσ"] = 4.2
    with pytest.raises(ChecksumError):
        load_params(document)


def test_shipped_parameter_file_declares_its_checksum(params):
    document = _raw_document()
    assert document["checksum"] == compute_checksum(document) == params.checksum


def test_tampered_copy_of_the_shipped_file_is_rejected(tmp_path):
    document = _raw_document()
    document["onsite"]["s"] = -2.15
    copy = tmp_path / "tampered.json"
    copy.write_text(json.dumps(document, ensure_ascii=False), encoding="utf-8")
    with pytest.raises(ChecksumError) as excinfo:
        load_params_file(copy)
    assert excinfo.value.field == "checksum"


def test_unknown_key_names_the_field():
    document = _raw_document()
    document["hopping"] = {}
    with pytest.raises(SchemaError) as excinfo:
        load_params(document)
    assert excinfo.value.field == "hopping"


def test_missing_integral_names_the_field():
    document = _raw_document()
    del document["sk_integrals"]["ddδ"]
    with pytest.raises(SchemaError) as excinfo:
        load_params(document)
    assert excinfo.value.field == "sk_integrals.ddδ"


def test_non_numeric_onsite_energy_is_rejected():
    document = _raw_document()
    document["onsite"]["s"] = "low"
    with pytest.raises(SchemaError) as excinfo:
        load_params(document)
    assert excinfo.value.field == "onsite.s"


def test_bond_along_z_reduces_to_the_bare_integrals(params):
    integrals = dict(params.sk_integrals)
    block = canonical_sk_matrix(integrals, (0.0, 0.0, 1.0))
    assert block[X, X] == pytest.approx(integrals["ppπ"])
    assert block[Y, Y] == pytest.approx(integrals["ppπ"])
    assert block[Z, Z] == pytest.approx(integrals["ppσ"])
    assert block[S, Z] == pytest.approx(integrals["spσ"])
    assert block[Z, S] == pytest.approx(-integrals["spσ"])
    assert block[Z2, Z2] == pytest.approx(integrals["ddσ"])
    assert block[XY, XY] == pytest.approx(integrals["ddδ"])
    assert block[X, Y] == pytest.approx(0.0)


@pytest.mark.parametrize(
    "cosines",
    [
        (1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3)),
        (1 / np.sqrt(3), -1 / np.sqrt(3), -1 / np.sqrt(3)),
        (0.6, 0.0, 0.8),
        (0.2, -0.4, np.sqrt(1 - 0.2**2 - 0.4**2)),
    ],
)
def test_reversed_bond_gives_the_transposed_block(params, cosines):
    integrals = dict(params.sk_integrals)
    forward = canonical_sk_matrix(integrals, cosines)
    backward = canonical_sk_matrix(integrals, tuple(-c for c in cosines))
    np.testing.assert_allclose(backward, forward.T, atol=1e-12)


@pytest.mark.parametrize("cosines", [(0.0, 0.0, 1.0), (0.6, 0.0, 0.8), (0.48, -0.6, 0.64)])
def test_shell_traces_are_rotation_invariant(params, cosines):
    integrals = dict(params.sk_integrals)
    block = canonical_sk_matrix(integrals, cosines)
    p_trace = block[X, X] + block[Y, Y] + block[Z, Z]
    d_trace = sum(block[i, i] for i in (YZ, ZX, XY, X2, Z2))
    assert p_trace == pytest.approx(integrals["ppσ"] + 2 * integrals["ppπ"])
    assert d_trace == pytest.approx(integrals["ddσ"] + 2 * integrals["ddπ"] + 2 * integrals["ddδ"])


def test_sk_block_rejects_non_unit_cosines(params):
    with pytest.raises(PreconditionError):
        sk_block(params, (1.0, 1.0, 0.0))


def test_spin_orbit_splits_the_p_shell(params):
    n = params.n_orbitals
    p = [params.orbital_index(label) for label in ("px", "py", "pz")]
    index = p + [n + i for i in p]
    block = spin_orbit_block(params)[np.ix_(index, index)]
    np.testing.assert_allclose(block, block.conj().T, atol=1e-15)
    strength = params.spin_orbit["p"]
    expected = np.sort([strength] * 4 + [-2 * strength] * 2)
    np.testing.assert_allclose(np.linalg.eigvalsh(block), expected, atol=1e-12)


def test_onsite_block_without_spin_orbit_is_diagonal(params):
    block = onsite_block(params, spin_orbit=False)
    np.testing.assert_allclose(block, np.diag(np.diag(block)))
    assert block.shape == (params.n_basis, params.n_basis)


def test_hybrid_projector_is_idempotent(params):
    projector = hybrid_projector(params, (1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3)))
    np.testing.assert_allclose(projector @ projector, projector, atol=1e-12)
    assert np.trace(projector).real == pytest.approx(2.0)


@pytest.mark.parametrize("point", ["G", "X", "L", "K"])
def test_bloch_hamiltonian_is_hermitian(params, point):
    h = bloch_hamiltonian(params, SYMMETRY_POINTS[point])
    np.testing.assert_allclose(h, h.conj().T, atol=1e-12)


def test_route_shares_segment_corners():
    path = k_path_from_route(("G", "X"), points_per_segment=4)
    assert path.shape == (5, 3)
    np.testing.assert_allclose(path[-1], SYMMETRY_POINTS["X"])
    dense = k_path_from_route(("G", "X"), points_per_segment=8)
    np.testing.assert_allclose(dense[::2], path)


def test_bulk_silicon_matches_published_targets(params):
    path = k_path_from_route(("L", "G", "X"), points_per_segment=60)
    report = bulk_bands(params, path)
    assert report.indirect_gap == pytest.approx(params.published_targets["indirect_gap_ev"], abs=0.05)
    assert 0.81 <= report.valley_position <= 0.85
    assert 0.0 < report.spin_orbit_splitting <= 3 * params.spin_orbit["p"] + 1e-6


def test_threaded_band_evaluation_is_identical(params):
    path = k_path_from_route(("G", "X"), points_per_segment=12)
    serial = bulk_bands(params, path, workers=1)
    threaded = bulk_bands(params, path, workers=3)
    np.testing.assert_array_equal(serial.bands, threaded.bands)
