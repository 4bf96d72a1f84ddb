from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy import sparse

from src.errors import AssemblyError, DimensionCapError
from src.lattice.domain import BOND_COSINES, DomainLattice
from src.tb.blocks import hybrid_projector, onsite_block, sk_block
from src.tb.params import TbParameterSet

logger = logging.getLogger(__name__)

# Row partition for the apply kernel; fixed so results do not depend on the worker count.
CHUNK_SITES = 4096


@dataclass(frozen=True)
class BondClass:
    """All directed bonds sharing one sublattice and slot, hence one hopping block."""

    sublattice: int
    slot: int
    rows: np.ndarray
    cols: np.ndarray
    block: np.ndarray


@dataclass(frozen=True)
class _ChunkPlan:
    start: int
    stop: int
    surface_rows: np.ndarray
    surface_local: np.ndarray
    bonds: Tuple[Tuple[int, np.ndarray, np.ndarray], ...]


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Hermitian operator on (site, spin, orbital); basis index = site * n_basis + spin * n_orb + orbital."""

    lattice: DomainLattice
    params: TbParameterSet
    site_potential: np.ndarray
    spin_orbit: bool
    passivation_shift: float
    onsite: np.ndarray
    surface_sites: np.ndarray
    surface_blocks: np.ndarray
    bond_classes: Tuple[BondClass, ...]
    assembly_manifest: Dict[str, object]
    _plan: Tuple[_ChunkPlan, ...] = field(repr=False, default=())

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def n_basis(self) -> int:
        return int(self.onsite.shape[0])

    @property
    def dimension(self) -> int:
        return self.n_sites * self.n_basis

    @property
    def diagonal(self) -> np.ndarray:
        diag = np.tile(np.real(np.diag(self.onsite)), (self.n_sites, 1))
        diag += self.site_potential[:, None]
        if self.surface_sites.size:
            diag[self.surface_sites] += np.real(np.einsum("sii->si", self.surface_blocks))
        return diag.reshape(-1)

    def iter_bonds(self) -> Iterator[Tuple[int, int, np.ndarray]]:
        """Yield (row_site, col_site, block) for every directed bond in deterministic order."""
        for bond_class in self.bond_classes:
            for row, col in zip(bond_class.rows, bond_class.cols):
                yield int(row), int(col), bond_class.block

    def site_block(self, site: int) -> np.ndarray:
        block = self.onsite + self.site_potential[site] * np.eye(self.n_basis)
        hit = np.flatnonzero(self.surface_sites == site)
        if hit.size:
            block = block + self.surface_blocks[int(hit[0])]
        return block

    def apply(self, vectors: np.ndarray, *, workers: int = 1) -> np.ndarray:
        """Matrix-free H @ vectors for a vector (dim,) or a block (dim, k)."""
        single = vectors.ndim == 1
        if vectors.shape[0] != self.dimension:
            raise AssemblyError(
                "vector length does not match the Hamiltonian dimension",
                details={"expected": self.dimension, "got": int(vectors.shape[0])},
            )
        block = vectors.reshape(self.dimension, -1)
        width = block.shape[1]
        source = np.ascontiguousarray(block, dtype=np.complex128).reshape(self.n_sites, self.n_basis, width)
        result = np.empty_like(source)

        def run(plan: _ChunkPlan) -> None:
            result[plan.start : plan.stop] = self._apply_chunk(source, plan)

        if workers > 1 and len(self._plan) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, self._plan))
        else:
            for plan in self._plan:
                run(plan)
        out = result.reshape(self.dimension, width)
        return out[:, 0] if single else out

    def _apply_chunk(self, source: np.ndarray, plan: _ChunkPlan) -> np.ndarray:
        local = source[plan.start : plan.stop]
        out = np.matmul(self.onsite, local)
        out += self.site_potential[plan.start : plan.stop, None, None] * local
        if plan.surface_rows.size:
            blocks = self.surface_blocks[plan.surface_local]
            out[plan.surface_rows - plan.start] += np.matmul(blocks, source[plan.surface_rows])
        for class_index, rows, cols in plan.bonds:
            hop = self.bond_classes[class_index].block
            out[rows - plan.start] += np.matmul(hop, source[cols])
        return out

    def to_sparse(self) -> sparse.csr_matrix:
        nb = self.n_basis
        rows: List[np.ndarray] = []
        cols: List[np.ndarray] = []
        vals: List[np.ndarray] = []
        local_r, local_c = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
        local_r, local_c = local_r.ravel(), local_c.ravel()

        def add(row_sites: np.ndarray, col_sites: np.ndarray, blocks: np.ndarray) -> None:
            rows.append((row_sites[:, None] * nb + local_r[None, :]).ravel())
            cols.append((col_sites[:, None] * nb + local_c[None, :]).ravel())
            vals.append(blocks.reshape(len(row_sites), -1).ravel())

        sites = np.arange(self.n_sites)
        onsite_blocks = np.broadcast_to(self.onsite, (self.n_sites, nb, nb)).copy()
        onsite_blocks += self.site_potential[:, None, None] * np.eye(nb)[None]
        if self.surface_sites.size:
            onsite_blocks[self.surface_sites] += self.surface_blocks
        add(sites, sites, onsite_blocks)
        for bond_class in self.bond_classes:
            add(bond_class.rows, bond_class.cols, np.broadcast_to(bond_class.block, (len(bond_class.rows), nb, nb)))
        matrix = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dimension, self.dimension),
        )
        matrix = matrix.tocsr()
        matrix.eliminate_zeros()
        return matrix

    def to_dense(self, cap: Optional[int] = None) -> np.ndarray:
        if cap is not None and self.dimension > cap:
            raise DimensionCapError(
                "dimension exceeds the dense cap", details={"dimension": self.dimension, "cap": cap}
            )
        return self.to_sparse().toarray()

    def gershgorin_bounds(self) -> Tuple[float, float]:
        nb = self.n_basis
        radius = np.zeros((self.n_sites, nb))
        radius += (np.abs(self.onsite).sum(axis=1) - np.abs(np.diag(self.onsite)))[None, :]
        if self.surface_sites.size:
            off = np.abs(self.surface_blocks).sum(axis=2) - np.abs(np.einsum("sii->si", self.surface_blocks))
            radius[self.surface_sites] += off
        for bond_class in self.bond_classes:
            radius[bond_class.rows] += np.abs(bond_class.block).sum(axis=1)[None, :]
        centres = self.diagonal.reshape(self.n_sites, nb)
        return float(np.min(centres - radius)), float(np.max(centres + radius))

    def with_potential(self, site_potential: np.ndarray) -> "SparseHamiltonian":
        """Same lattice and couplings with a different diagonal potential."""
        return assemble(
            self.lattice,
            self.params,
            site_potential,
            spin_orbit=self.spin_orbit,
            passivation_shift=self.passivation_shift,
        )


def assemble(
    lattice: DomainLattice,
    params: TbParameterSet,
    site_potential: np.ndarray,
    *,
    spin_orbit: bool = True,
    passivation_shift: float = 30.0,
) -> SparseHamiltonian:
    """Build the operator from the lattice topology, the parameter set and a per-site potential (eV)."""
    potential = np.asarray(site_potential, dtype=np.float64)
    if potential.shape != (lattice.n_sites,):
        raise AssemblyError(
            "site potential length must equal the number of sites",
            details={"n_sites": lattice.n_sites, "potential_shape": list(potential.shape)},
        )
    if not np.all(np.isfinite(potential)):
        raise AssemblyError("site potential contains non-finite values")
    if not lattice.has_topology:
        raise AssemblyError("lattice has no neighbour topology")

    onsite = onsite_block(params, spin_orbit=spin_orbit)

    neighbors = lattice.neighbors
    surface_sites = np.flatnonzero(lattice.is_surface)
    surface_blocks = np.zeros((surface_sites.size, params.n_basis, params.n_basis), dtype=np.complex128)
    if passivation_shift != 0.0 and surface_sites.size:
        projectors = {}
        for sub in (0, 1):
            sign = 1.0 if sub == 0 else -1.0
            for slot in range(4):
                projectors[(sub, slot)] = passivation_shift * hybrid_projector(params, sign * BOND_COSINES[slot])
        for k, site in enumerate(surface_sites):
            sub = int(lattice.sublattice[site])
            for slot in range(4):
                if neighbors[site, slot] < 0:
                    surface_blocks[k] += projectors[(sub, slot)]

    classes: List[BondClass] = []
    for sub in (0, 1):
        sign = 1.0 if sub == 0 else -1.0
        for slot in range(4):
            rows = np.flatnonzero((lattice.sublattice == sub) & (neighbors[:, slot] >= 0))
            if rows.size == 0:
                continue
            classes.append(
                BondClass(
                    sublattice=sub,
                    slot=slot,
                    rows=rows,
                    cols=neighbors[rows, slot],
                    block=sk_block(params, sign * BOND_COSINES[slot]),
                )
            )

    manifest = {
        "lattice_sha256": lattice.digest(),
        "params_checksum": params.checksum,
        "potential_sha256": hashlib.sha256(np.ascontiguousarray(potential).tobytes()).hexdigest(),
        "spin_orbit": spin_orbit,
        "passivation_shift_ev": passivation_shift,
    }
    hamiltonian = SparseHamiltonian(
        lattice=lattice,
        params=params,
        site_potential=potential,
        spin_orbit=spin_orbit,
        passivation_shift=passivation_shift,
        onsite=onsite,
        surface_sites=surface_sites,
        surface_blocks=surface_blocks,
        bond_classes=tuple(classes),
        assembly_manifest=manifest,
        _plan=_build_plan(lattice.n_sites, surface_sites, classes),
    )
    logger.info(
        "Assembled Hamiltonian: dimension %d, %d directed bonds, %d passivated surface sites",
        hamiltonian.dimension,
        sum(len(c.rows) for c in classes),
        surface_sites.size,
    )
    return hamiltonian


def _build_plan(n_sites: int, surface_sites: np.ndarray, classes: List[BondClass]) -> Tuple[_ChunkPlan, ...]:
    plans = []
    for start in range(0, n_sites, CHUNK_SITES):
        stop = min(start + CHUNK_SITES, n_sites)
        lo, hi = np.searchsorted(surface_sites, [start, stop])
        bonds = []
        for index, bond_class in enumerate(classes):
            a, b = np.searchsorted(bond_class.rows, [start, stop])
            if b > a:
                bonds.append((index, bond_class.rows[a:b], bond_class.cols[a:b]))
        plans.append(
            _ChunkPlan(
                start=start,
                stop=stop,
                surface_rows=surface_sites[lo:hi],
                surface_local=np.arange(lo, hi),
                bonds=tuple(bonds),
            )
        )
    return tuple(plans)


__all__ = ["BondClass", "CHUNK_SITES", "SparseHamiltonian", "assemble"]
