from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Union

import numpy as np

from src.errors import SchemaError

logger = logging.getLogger(__name__)

CORE_KEYS = ("kappa", "zeta", "alpha_per_nm", "beta_per_nm", "gamma_per_nm")


@dataclass(frozen=True)
class BmbCoreParams:
    """Pantelides-form core correction; alpha, beta and gamma in 1/nm."""

    kappa: float
    zeta: float
    alpha: float
    beta: float
    gamma: float
    provenance: str = ""

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise SchemaError(f"{name} must be positive", field=f"{name}_per_nm")
        if not (0.0 <= self.zeta <= 1.0):
            raise SchemaError("zeta must lie in [0, 1]", field="zeta")
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise SchemaError("kappa must be positive", field="kappa")

    def to_document(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa,
            "zeta": self.zeta,
            "alpha_per_nm": self.alpha,
            "beta_per_nm": self.beta,
            "gamma_per_nm": self.gamma,
            "provenance": self.provenance,
        }


def bmb_core_potential(params: BmbCoreParams, q: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Momentum-space core potential U_cor(q); vectorised over ``q``."""
    wave = np.asarray(q, dtype=np.float64)
    if np.any(wave < 0):
        raise SchemaError("wavenumber must be non-negative", field="q")
    q2 = wave * wave
    kappa = params.kappa
    value = (
        kappa * params.zeta * q2 / (q2 + params.alpha**2)
        + kappa * (1.0 - params.zeta) * q2 / (q2 + params.beta**2)
        - q2 / (q2 + params.gamma**2)
    ) / (math.pi**2 * kappa)
    if np.ndim(value) == 0:
        return float(value)
    return value


def core_potential_table(params: BmbCoreParams, q_grid: Sequence[float]) -> np.ndarray:
    """Two-column table (q in 1/nm, U_cor)."""
    grid = np.asarray(q_grid, dtype=np.float64)
    return np.column_stack([grid, np.asarray(bmb_core_potential(params, grid))])


def load_core_params(document: Mapping[str, Any]) -> BmbCoreParams:
    for key in CORE_KEYS:
        if key not in document:
            raise SchemaError(f"missing {key}", field=key)
        value = document[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"non-numeric entry for {key}", field=key)
    unknown = sorted(set(document) - set(CORE_KEYS) - {"provenance"})
    if unknown:
        raise SchemaError(f"unknown key {unknown[0]}", field=unknown[0])
    return BmbCoreParams(
        kappa=float(document["kappa"]),
        zeta=float(document["zeta"]),
        alpha=float(document["alpha_per_nm"]),
        beta=float(document["beta_per_nm"]),
        gamma=float(document["gamma_per_nm"]),
        provenance=str(document.get("provenance", "")),
    )


def load_core_params_file(path: Union[str, Path]) -> BmbCoreParams:
    file_path = Path(path)
    if not file_path.exists():
        raise SchemaError(f"core parameter file {file_path} does not exist", field="core_params_file")
    logger.info("Loading core potential parameters from %s", file_path)
    try:
        document = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"core parameter file is not valid JSON: {exc}", field="core_params_file") from exc
    return load_core_params(document)


__all__ = [
    "BmbCoreParams",
    "bmb_core_potential",
    "core_potential_table",
    "load_core_params",
    "load_core_params_file",
]
