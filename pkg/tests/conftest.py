from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.config.run_config import FieldConfig, PotentialConfig, RunConfig
from src.config.settings import DATA_DIR
from src.db.engine import dispose_engines
from src.lattice.domain import DomainSpec, build_domain
from src.potentials.donor import DonorPotentialParams, total_potential
from src.solver.hamiltonian import assemble
from src.solver.lanczos import SolverConfig
from src.tb.params import load_params_file

A = 0.5431
PARAMS_PATH = DATA_DIR / "si_sp3d5s_boykin2004.json"
CORE_PATH = DATA_DIR / "bmb_core_pantelides.json"


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run scaled-down physics checks")


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: long-running physics check, needs --runslow")


def pytest_collection_modifyitems(config: pytest.Config, items: list) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _close_ledgers():
    yield
    dispose_engines()


@pytest.fixture(scope="session")
def params():
    return load_params_file(PARAMS_PATH)


@pytest.fixture(scope="session")
def tiny_spec() -> DomainSpec:
    """1 x 2 x 1 conventional cells: 16 sites, 320 basis states."""
    return DomainSpec(extents=(A, 2 * A, A), impurity_depth=A, lattice_constant=A, depth_axis="y")


@pytest.fixture(scope="session")
def tiny_lattice(tiny_spec):
    return build_domain(tiny_spec)


@pytest.fixture(scope="session")
def tiny_hamiltonian(tiny_lattice, params):
    donor = DonorPotentialParams(kappa=11.9, u0=4.33, donor_site=tiny_lattice.donor_index)
    return assemble(tiny_lattice, params, total_potential(donor, tiny_lattice))


@pytest.fixture(scope="session")
def cube_lattice():
    """2 x 2 x 2 conventional cells with the donor half way down: 64 sites."""
    return build_domain(DomainSpec(extents=(2 * A, 2 * A, 2 * A), impurity_depth=A, lattice_constant=A))


@pytest.fixture(scope="session")
def cube_bonds(cube_lattice) -> set:
    """Undirected bonds of the cube from an all-pairs distance scan."""
    positions = cube_lattice.positions
    bond_length = cube_lattice.spec.bond_length
    bonds = set()
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            if abs(np.linalg.norm(positions[j] - positions[i]) - bond_length) <= 1e-6 * bond_length:
                bonds.add((i, j))
    return bonds


@pytest.fixture
def exact_solver() -> SolverConfig:
    """Full Krylov space: Lanczos becomes exact on the tiny lattice."""
    return SolverConfig(n_states=4, sigma=0.5, window_halfwidth=None, max_basis=320, seed=11, mode="plain")


@pytest.fixture
def tiny_config(tiny_spec, exact_solver, tmp_path: Path) -> RunConfig:
    return RunConfig(
        domain=tiny_spec,
        params_file=PARAMS_PATH,
        core_params_file=CORE_PATH,
        potential=PotentialConfig(u0=4.33),
        efield=FieldConfig(grid=(-0.1, -0.05, 0.0, 0.05, 0.1)),
        depth_range=(0.1, 1.0),
        solver=exact_solver,
        output_dir=tmp_path / "out",
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
