"""Diamond-lattice domain construction."""

from .domain import AtomSite, DomainLattice, DomainSpec, build_domain, neighbor_list

__all__ = ["AtomSite", "DomainLattice", "DomainSpec", "build_domain", "neighbor_list"]
