from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

from scipy import constants

from src.errors import PreconditionError

# Bohr magneton in eV/T.
BOHR_MAGNETON_EV_T = constants.physical_constants["Bohr magneton in eV/T"][0]

HALF = 0.5
SPIN_PROJECTIONS = (HALF, -HALF)


@dataclass(frozen=True)
class SpinLevels:
    """Electron S=1/2 times nuclear I=1/2 levels, keyed by (m_S, m_I); energies in the units of ``a`` (eV)."""

    g: float
    b0: float
    a: float
    energies: Dict[Tuple[float, float], float]

    def energy(self, m_s: float, m_i: float) -> float:
        return self.energies[(m_s, m_i)]

    @property
    def esr_transitions(self) -> Tuple[float, float]:
        """Delta m_S = +-1, Delta m_I = 0 for m_I = +1/2 and -1/2; their difference is ``a``."""
        return tuple(  # type: ignore[return-value]
            self.energy(HALF, m_i) - self.energy(-HALF, m_i) for m_i in SPIN_PROJECTIONS
        )

    def to_document(self) -> Dict[str, Any]:
        return {
            "g": self.g,
            "b0_T": self.b0,
            "a_ev": self.a,
            "levels_ev": [
                {"m_s": m_s, "m_i": m_i, "energy_ev": value} for (m_s, m_i), value in sorted(self.energies.items())
            ],
            "esr_transitions_ev": list(self.esr_transitions),
        }


def spin_levels(g: float, b0: float, a: float) -> SpinLevels:
    if not (math.isfinite(b0) and b0 >= 0.0):
        raise PreconditionError("b0 must be a non-negative field in tesla", details={"b0": b0})
    zeeman = g * BOHR_MAGNETON_EV_T * b0
    energies = {
        (m_s, m_i): zeeman * m_s + a * m_i * m_s for m_s in SPIN_PROJECTIONS for m_i in SPIN_PROJECTIONS
    }
    return SpinLevels(g=float(g), b0=float(b0), a=float(a), energies=energies)


__all__ = ["BOHR_MAGNETON_EV_T", "SpinLevels", "spin_levels"]
