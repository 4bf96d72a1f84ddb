from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.errors import DomainSpecError, DomainTooSmallError

logger = logging.getLogger(__name__)

AXES: Dict[str, int] = {"x": 0, "y": 1, "z": 2}

# Positions in units of a/4. The first four entries form the fcc sublattice (A),
# the last four the sublattice displaced by (1, 1, 1)/4 (B).
BASIS_QUARTERS = np.array(
    [
        [0, 0, 0],
        [0, 2, 2],
        [2, 0, 2],
        [2, 2, 0],
        [1, 1, 1],
        [1, 3, 3],
        [3, 1, 3],
        [3, 3, 1],
    ],
    dtype=np.int64,
)
SUBLATTICE = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=np.int8)

# Bond vectors from an A site (a/4 units); B sites use the negated set in the same slot order.
BOND_QUARTERS = np.array(
    [
        [1, 1, 1],
        [1, -1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
    ],
    dtype=np.int64,
)
BOND_COSINES = BOND_QUARTERS / math.sqrt(3.0)

HOST = "host"
DONOR = "donor"


@dataclass(frozen=True)
class DomainSpec:
    extents: Tuple[float, float, float]
    impurity_depth: float
    lattice_constant: float = 0.5431
    depth_axis: str = "y"

    def __post_init__(self) -> None:
        extents = tuple(float(v) for v in self.extents)
        if len(extents) != 3:
            raise DomainSpecError("extents must have three components", details={"extents": list(extents)})
        object.__setattr__(self, "extents", extents)
        if any(not math.isfinite(v) or v <= 0 for v in extents):
            raise DomainSpecError("all extents must be positive", details={"extents": list(extents)})
        if not (math.isfinite(self.lattice_constant) and self.lattice_constant > 0):
            raise DomainSpecError(
                "lattice_constant must be positive", details={"lattice_constant": self.lattice_constant}
            )
        if self.depth_axis not in AXES:
            raise DomainSpecError("depth_axis must be one of x, y, z", details={"depth_axis": self.depth_axis})
        depth_extent = extents[AXES[self.depth_axis]]
        if not (0.0 < self.impurity_depth < depth_extent):
            raise DomainSpecError(
                "impurity_depth must lie strictly inside the domain along the depth axis",
                details={"impurity_depth": self.impurity_depth, "depth_extent": depth_extent},
            )

    @property
    def axis_index(self) -> int:
        return AXES[self.depth_axis]

    @property
    def bond_length(self) -> float:
        return self.lattice_constant * math.sqrt(3.0) / 4.0

    def cell_counts(self) -> Tuple[int, int, int]:
        counts = tuple(int(math.floor(extent / self.lattice_constant + 1e-9)) for extent in self.extents)
        return counts  # type: ignore[return-value]

    def closed_form_site_count(self) -> int:
        nx, ny, nz = self.cell_counts()
        return 8 * nx * ny * nz

    def to_document(self) -> Dict[str, object]:
        return {
            "extents_nm": list(self.extents),
            "impurity_depth_nm": self.impurity_depth,
            "lattice_constant_nm": self.lattice_constant,
            "depth_axis": self.depth_axis,
        }


@dataclass(frozen=True)
class AtomSite:
    index: int
    position: Tuple[float, float, float]
    species: str
    is_surface: bool


@dataclass(frozen=True, eq=False)
class DomainLattice:
    """Diamond-lattice slab; per-site data is held in parallel numpy arrays."""

    spec: DomainSpec
    grid: np.ndarray
    positions: np.ndarray
    sublattice: np.ndarray
    donor_index: int
    neighbors: Optional[np.ndarray] = None
    bond_cosines: Optional[np.ndarray] = None
    is_surface: Optional[np.ndarray] = None
    _digest: Dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_sites(self) -> int:
        return int(self.positions.shape[0])

    @property
    def has_topology(self) -> bool:
        return self.neighbors is not None

    @property
    def donor_position(self) -> np.ndarray:
        return self.positions[self.donor_index]

    @property
    def snapped_depth(self) -> float:
        return float(self.positions[self.donor_index, self.spec.axis_index])

    @property
    def requested_depth(self) -> float:
        return float(self.spec.impurity_depth)

    def site(self, index: int) -> AtomSite:
        surface = bool(self.is_surface[index]) if self.is_surface is not None else False
        return AtomSite(
            index=int(index),
            position=tuple(float(v) for v in self.positions[index]),  # type: ignore[arg-type]
            species=DONOR if index == self.donor_index else HOST,
            is_surface=surface,
        )

    def iter_sites(self) -> Iterator[AtomSite]:
        for index in range(self.n_sites):
            yield self.site(index)

    @property
    def sites(self) -> List[AtomSite]:
        return list(self.iter_sites())

    def neighbors_of(self, index: int) -> List[Tuple[int, Tuple[float, float, float]]]:
        if self.neighbors is None or self.bond_cosines is None:
            raise DomainSpecError("neighbor topology has not been built")
        entries = []
        for slot in range(4):
            j = int(self.neighbors[index, slot])
            if j >= 0:
                entries.append((j, tuple(float(v) for v in self.bond_cosines[index, slot])))
        return entries  # type: ignore[return-value]

    def bond_count(self) -> int:
        """Number of undirected bonds."""
        if self.neighbors is None:
            return 0
        return int(np.count_nonzero(self.neighbors >= 0)) // 2

    def missing_bond_cosines(self, index: int) -> List[np.ndarray]:
        if self.neighbors is None:
            raise DomainSpecError("neighbor topology has not been built")
        sign = 1.0 if self.sublattice[index] == 0 else -1.0
        return [sign * BOND_COSINES[slot] for slot in range(4) if self.neighbors[index, slot] < 0]

    def digest(self) -> str:
        cached = self._digest.get("sha256")
        if cached is None:
            hasher = hashlib.sha256()
            hasher.update(repr(self.spec.to_document()).encode("utf-8"))
            hasher.update(np.ascontiguousarray(self.grid).tobytes())
            hasher.update(str(self.donor_index).encode("ascii"))
            cached = hasher.hexdigest()
            self._digest["sha256"] = cached
        return cached


def build_domain(spec: DomainSpec) -> DomainLattice:
    """Build the slab, place the donor and attach the nearest-neighbour topology."""
    nx, ny, nz = spec.cell_counts()
    if min(nx, ny, nz) < 1:
        raise DomainTooSmallError(
            "every extent must hold at least one conventional cell",
            details={"extents": list(spec.extents), "lattice_constant": spec.lattice_constant},
        )

    cells = np.stack(
        np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"),
        axis=-1,
    ).reshape(-1, 3)
    grid = (4 * cells[:, None, :] + BASIS_QUARTERS[None, :, :]).reshape(-1, 3)
    sublattice = np.tile(SUBLATTICE, cells.shape[0])
    positions = grid.astype(np.float64) * (spec.lattice_constant / 4.0)

    expected = spec.closed_form_site_count()
    if grid.shape[0] != expected:
        raise DomainSpecError("site count disagrees with the closed-form count", details={"sites": grid.shape[0]})

    donor_index = _snap_donor(spec, grid, positions)
    lattice = DomainLattice(
        spec=spec,
        grid=grid,
        positions=positions,
        sublattice=sublattice,
        donor_index=donor_index,
    )
    lattice = neighbor_list(lattice)
    logger.info(
        "Built domain %s nm: %d cells, %d sites, donor %d at depth %.4f nm (requested %.4f nm)",
        "x".join(f"{v:g}" for v in spec.extents),
        nx * ny * nz,
        lattice.n_sites,
        donor_index,
        lattice.snapped_depth,
        spec.impurity_depth,
    )
    return lattice


def neighbor_list(lattice: DomainLattice) -> DomainLattice:
    """Populate the four-slot neighbour table, bond cosines and surface flags."""
    grid = lattice.grid
    shape = tuple(int(v) for v in grid.max(axis=0) + 1)
    lookup = np.full(shape, -1, dtype=np.int64)
    lookup[grid[:, 0], grid[:, 1], grid[:, 2]] = np.arange(grid.shape[0], dtype=np.int64)

    sign = np.where(lattice.sublattice == 0, 1, -1).astype(np.int64)
    n_sites = grid.shape[0]
    neighbors = np.full((n_sites, 4), -1, dtype=np.int64)
    cosines = np.zeros((n_sites, 4, 3), dtype=np.float64)
    bounds = np.array(shape, dtype=np.int64)

    for slot in range(4):
        offset = sign[:, None] * BOND_QUARTERS[slot][None, :]
        target = grid + offset
        inside = np.all((target >= 0) & (target < bounds), axis=1)
        found = np.full(n_sites, -1, dtype=np.int64)
        found[inside] = lookup[target[inside, 0], target[inside, 1], target[inside, 2]]
        neighbors[:, slot] = found
        present = found >= 0
        cosines[present, slot, :] = offset[present] / math.sqrt(3.0)

    counts = np.count_nonzero(neighbors >= 0, axis=1)
    is_surface = counts < 4
    logger.debug(
        "Neighbour table: %d bonds, %d surface sites",
        int(np.count_nonzero(neighbors >= 0)) // 2,
        int(np.count_nonzero(is_surface)),
    )
    return replace(
        lattice,
        neighbors=neighbors,
        bond_cosines=cosines,
        is_surface=is_surface,
        _digest={},
    )


def _snap_donor(spec: DomainSpec, grid: np.ndarray, positions: np.ndarray) -> int:
    """Snap the depth to the nearest atomic plane, then pick the site closest to the lateral centre."""
    axis = spec.axis_index
    quarter = spec.lattice_constant / 4.0
    planes = np.unique(grid[:, axis])
    wanted = spec.impurity_depth / quarter
    plane = planes[int(np.argmin(np.abs(planes - wanted)))]

    in_plane = np.flatnonzero(grid[:, axis] == plane)
    centre = np.array(spec.extents, dtype=np.float64) / 2.0
    lateral = [k for k in range(3) if k != axis]
    distance = np.sum((positions[in_plane][:, lateral] - centre[lateral]) ** 2, axis=1)
    return int(in_plane[int(np.argmin(distance))])


__all__ = [
    "AXES",
    "AtomSite",
    "BOND_COSINES",
    "DONOR",
    "DomainLattice",
    "DomainSpec",
    "HOST",
    "build_domain",
    "neighbor_list",
]
