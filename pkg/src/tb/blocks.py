from __future__ import annotations

import math
from typing import Dict, Sequence

import numpy as np

from src.errors import PreconditionError
from src.tb.params import CANONICAL_ORDER, TbParameterSet

SQRT3 = math.sqrt(3.0)

S, X, Y, Z, YZ, ZX, XY, X2, Z2, SS = range(10)
_CANONICAL_INDEX: Dict[str, int] = {label: i for i, label in enumerate(CANONICAL_ORDER)}
_ANGULAR_MOMENTUM = np.array([0, 1, 1, 1, 2, 2, 2, 2, 2, 0])

# Pauli matrices in the (up, down) spin basis.
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


def _f_p_txy(l: float, m: float, n: float, sig: float, pi: float) -> float:
    # <x|xy>, cyclic in (x, y, z)
    return SQRT3 * l * l * m * sig + m * (1.0 - 2.0 * l * l) * pi


def _f_p_tzx(l: float, m: float, n: float, sig: float, pi: float) -> float:
    # <x|zx>, cyclic in (x, y, z)
    return SQRT3 * l * l * n * sig + n * (1.0 - 2.0 * l * l) * pi


def _f_p_tyz(l: float, m: float, n: float, sig: float, pi: float) -> float:
    return SQRT3 * l * m * n * sig - 2.0 * l * m * n * pi


def _f_dd_diag(l: float, m: float, n: float, sig: float, pi: float, delta: float) -> float:
    # <xy|xy>, cyclic
    return 3.0 * l * l * m * m * sig + (l * l + m * m - 4.0 * l * l * m * m) * pi + (n * n + l * l * m * m) * delta


def _f_dd_off(l: float, m: float, n: float, sig: float, pi: float, delta: float) -> float:
    # <xy|yz>, cyclic
    return 3.0 * l * m * m * n * sig + l * n * (1.0 - 4.0 * m * m) * pi + l * n * (m * m - 1.0) * delta


def canonical_sk_matrix(integrals: Dict[str, float], cosines: Sequence[float]) -> np.ndarray:
    """Two-centre hopping between the ten canonical orbitals.

    Element [a, b] couples orbital a on the first atom with orbital b on the
    second; ``cosines`` point from the first atom to the second.
    """
    l, m, n = (float(c) for c in cosines)
    v = lambda name: float(integrals.get(name, 0.0))  # noqa: E731
    ss, sss, s_ss = v("ssσ"), v("s*s*σ"), v("ss*σ")
    sp, ssp = v("spσ"), v("s*pσ")
    pps, ppp = v("ppσ"), v("ppπ")
    sd, ssd = v("sdσ"), v("s*dσ")
    pds, pdp = v("pdσ"), v("pdπ")
    dds, ddp, ddd = v("ddσ"), v("ddπ"), v("ddδ")

    l2, m2, n2 = l * l, m * m, n * n
    lm2 = l2 - m2
    z2 = n2 - 0.5 * (l2 + m2)

    e = np.zeros((10, 10), dtype=np.float64)

    e[S, S] = ss
    e[SS, SS] = sss
    e[S, SS] = s_ss
    e[SS, S] = s_ss

    for s_orb, vsp, vsd in ((S, sp, sd), (SS, ssp, ssd)):
        e[s_orb, X] = l * vsp
        e[s_orb, Y] = m * vsp
        e[s_orb, Z] = n * vsp
        e[s_orb, XY] = SQRT3 * l * m * vsd
        e[s_orb, YZ] = SQRT3 * m * n * vsd
        e[s_orb, ZX] = SQRT3 * n * l * vsd
        e[s_orb, X2] = 0.5 * SQRT3 * lm2 * vsd
        e[s_orb, Z2] = z2 * vsd

    e[X, X] = l2 * pps + (1.0 - l2) * ppp
    e[Y, Y] = m2 * pps + (1.0 - m2) * ppp
    e[Z, Z] = n2 * pps + (1.0 - n2) * ppp
    e[X, Y] = e[Y, X] = l * m * (pps - ppp)
    e[X, Z] = e[Z, X] = l * n * (pps - ppp)
    e[Y, Z] = e[Z, Y] = m * n * (pps - ppp)

    e[X, XY] = _f_p_txy(l, m, n, pds, pdp)
    e[Y, YZ] = _f_p_txy(m, n, l, pds, pdp)
    e[Z, ZX] = _f_p_txy(n, l, m, pds, pdp)
    e[X, ZX] = _f_p_tzx(l, m, n, pds, pdp)
    e[Y, XY] = _f_p_tzx(m, n, l, pds, pdp)
    e[Z, YZ] = _f_p_tzx(n, l, m, pds, pdp)
    e[X, YZ] = e[Y, ZX] = e[Z, XY] = _f_p_tyz(l, m, n, pds, pdp)
    e[X, X2] = 0.5 * SQRT3 * l * lm2 * pds + l * (1.0 - lm2) * pdp
    e[Y, X2] = 0.5 * SQRT3 * m * lm2 * pds - m * (1.0 + lm2) * pdp
    e[Z, X2] = 0.5 * SQRT3 * n * lm2 * pds - n * lm2 * pdp
    e[X, Z2] = l * z2 * pds - SQRT3 * l * n2 * pdp
    e[Y, Z2] = m * z2 * pds - SQRT3 * m * n2 * pdp
    e[Z, Z2] = n * z2 * pds + SQRT3 * n * (l2 + m2) * pdp

    e[XY, XY] = _f_dd_diag(l, m, n, dds, ddp, ddd)
    e[YZ, YZ] = _f_dd_diag(m, n, l, dds, ddp, ddd)
    e[ZX, ZX] = _f_dd_diag(n, l, m, dds, ddp, ddd)
    e[XY, YZ] = e[YZ, XY] = _f_dd_off(l, m, n, dds, ddp, ddd)
    e[YZ, ZX] = e[ZX, YZ] = _f_dd_off(m, n, l, dds, ddp, ddd)
    e[ZX, XY] = e[XY, ZX] = _f_dd_off(n, l, m, dds, ddp, ddd)
    e[XY, X2] = e[X2, XY] = 1.5 * l * m * lm2 * dds - 2.0 * l * m * lm2 * ddp + 0.5 * l * m * lm2 * ddd
    e[YZ, X2] = e[X2, YZ] = (
        1.5 * m * n * lm2 * dds - m * n * (1.0 + 2.0 * lm2) * ddp + m * n * (1.0 + 0.5 * lm2) * ddd
    )
    e[ZX, X2] = e[X2, ZX] = (
        1.5 * n * l * lm2 * dds + n * l * (1.0 - 2.0 * lm2) * ddp - n * l * (1.0 - 0.5 * lm2) * ddd
    )
    e[XY, Z2] = e[Z2, XY] = (
        SQRT3 * l * m * z2 * dds - 2.0 * SQRT3 * l * m * n2 * ddp + 0.5 * SQRT3 * l * m * (1.0 + n2) * ddd
    )
    e[YZ, Z2] = e[Z2, YZ] = (
        SQRT3 * m * n * z2 * dds + SQRT3 * m * n * (l2 + m2 - n2) * ddp - 0.5 * SQRT3 * m * n * (l2 + m2) * ddd
    )
    e[ZX, Z2] = e[Z2, ZX] = (
        SQRT3 * l * n * z2 * dds + SQRT3 * l * n * (l2 + m2 - n2) * ddp - 0.5 * SQRT3 * l * n * (l2 + m2) * ddd
    )
    e[X2, X2] = 0.75 * lm2 * lm2 * dds + (l2 + m2 - lm2 * lm2) * ddp + (n2 + 0.25 * lm2 * lm2) * ddd
    e[X2, Z2] = e[Z2, X2] = (
        0.5 * SQRT3 * lm2 * z2 * dds - SQRT3 * n2 * lm2 * ddp + 0.25 * SQRT3 * (1.0 + n2) * lm2 * ddd
    )
    e[Z2, Z2] = z2 * z2 * dds + 3.0 * n2 * (l2 + m2) * ddp + 0.75 * (l2 + m2) ** 2 * ddd

    # Lower triangle of the mixed-parity blocks: E_ba(n) = (-1)^(la+lb) E_ab(n).
    for first in (S, SS, X, Y, Z):
        for second in (X, Y, Z, YZ, ZX, XY, X2, Z2):
            if _ANGULAR_MOMENTUM[first] < _ANGULAR_MOMENTUM[second]:
                parity = (-1) ** int(_ANGULAR_MOMENTUM[first] + _ANGULAR_MOMENTUM[second])
                e[second, first] = parity * e[first, second]
    return e


def _check_unit(cosines: Sequence[float]) -> np.ndarray:
    vector = np.asarray(cosines, dtype=np.float64)
    if vector.shape != (3,):
        raise PreconditionError("direction cosines must be a 3-vector", details={"shape": list(vector.shape)})
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > 1e-12:
        raise PreconditionError("direction cosines must have unit norm", details={"norm": norm})
    return vector


def sk_orbital_block(params: TbParameterSet, direction_cosines: Sequence[float]) -> np.ndarray:
    """Real n_orb x n_orb hopping block for the parameter set's orbitals."""
    vector = _check_unit(direction_cosines)
    full = canonical_sk_matrix(dict(params.sk_integrals), vector)
    index = [_CANONICAL_INDEX[label] for label in params.orbital_set]
    return full[np.ix_(index, index)]


def sk_block(params: TbParameterSet, direction_cosines: Sequence[float]) -> np.ndarray:
    """Spin-diagonal hopping block, basis index = spin * n_orb + orbital."""
    orbital = sk_orbital_block(params, direction_cosines)
    return np.kron(np.eye(2), orbital).astype(np.complex128)


def angular_momentum_p(params: TbParameterSet) -> Sequence[np.ndarray]:
    """L_x, L_y, L_z restricted to the real p orbitals, (L_k)_ij = -i eps_kij."""
    n = params.n_orbitals
    p_index = [params.orbital_index(label) for label in ("px", "py", "pz")]
    matrices = []
    for k in range(3):
        lk = np.zeros((n, n), dtype=np.complex128)
        for i in range(3):
            for j in range(3):
                lk[p_index[i], p_index[j]] = -1j * _levi_civita(k, i, j)
        matrices.append(lk)
    return matrices


def spin_orbit_block(params: TbParameterSet) -> np.ndarray:
    """lambda_p L.sigma on the p shell; lambda_p is one third of the atomic splitting."""
    n = params.n_orbitals
    block = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    strength = float(params.spin_orbit.get("p", 0.0))
    if strength == 0.0 or "px" not in params.orbital_set:
        return block
    for sigma, lk in zip(PAULI, angular_momentum_p(params)):
        block += strength * np.kron(sigma, lk)
    return block


def onsite_block(params: TbParameterSet, *, spin_orbit: bool = True) -> np.ndarray:
    block = np.kron(np.eye(2), np.diag(params.onsite_energies)).astype(np.complex128)
    if spin_orbit:
        block = block + spin_orbit_block(params)
    return block


def hybrid_projector(params: TbParameterSet, direction_cosines: Sequence[float]) -> np.ndarray:
    """Spin-diagonal projector on the sp3 hybrid pointing along a (missing) bond."""
    vector = _check_unit(direction_cosines)
    hybrid = np.zeros(params.n_orbitals, dtype=np.float64)
    if "s" in params.orbital_set:
        hybrid[params.orbital_index("s")] = 0.5
    for label, component in zip(("px", "py", "pz"), vector):
        if label in params.orbital_set:
            hybrid[params.orbital_index(label)] = 0.5 * SQRT3 * component
    return np.kron(np.eye(2), np.outer(hybrid, hybrid)).astype(np.complex128)


def _levi_civita(i: int, j: int, k: int) -> int:
    if (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        return 1
    if (i, j, k) in ((0, 2, 1), (2, 1, 0), (1, 0, 2)):
        return -1
    return 0


__all__ = [
    "PAULI",
    "canonical_sk_matrix",
    "hybrid_projector",
    "onsite_block",
    "sk_block",
    "sk_orbital_block",
    "spin_orbit_block",
]
