from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# Project root (two levels up from this file: src/config/settings.py -> src -> repo root)
ROOT_DIR = Path(__file__).resolve().parents[2]
ENV_PATH = ROOT_DIR / ".env"
DATA_DIR = ROOT_DIR / "data"

# Load .env if present; fallback to real environment otherwise.
if ENV_PATH.exists():
    load_dotenv(ENV_PATH)
else:
    load_dotenv()


def _get_env(name: str, default: Optional[str] = None) -> str:
    value = os.getenv(name, default)
    if value is None:
        raise RuntimeError(f"Missing required environment variable '{name}'")
    return value


def _get_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise RuntimeError(f"Environment variable '{name}' must be an integer, got '{value}'") from exc


def _get_float(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None:
        return default
    try:
        return float(value)
    except ValueError as exc:
        raise RuntimeError(f"Environment variable '{name}' must be a number, got '{value}'") from exc


@dataclass(frozen=True)
class PathSettings:
    params_file: Path
    params_override: Optional[Path]
    core_params_file: Path
    results_db_name: str


@dataclass(frozen=True)
class RuntimeSettings:
    log_level: str
    workers: int
    dense_cap: int


@dataclass(frozen=True)
class PhysicsDefaults:
    lattice_constant_nm: float
    kappa: float
    u0_ev: float
    target_binding_ev: float
    passivation_shift_ev: float


@dataclass(frozen=True)
class Settings:
    paths: PathSettings
    runtime: RuntimeSettings
    physics: PhysicsDefaults

    @classmethod
    def from_env(cls) -> "Settings":
        path_settings = PathSettings(
            params_file=Path(_get_env("DONOR_STARK_PARAMS", str(DATA_DIR / "si_sp3d5s_boykin2004.json"))),
            params_override=Path(os.environ["DONOR_STARK_PARAMS"]) if os.getenv("DONOR_STARK_PARAMS") else None,
            core_params_file=Path(
                _get_env("DONOR_STARK_CORE_PARAMS", str(DATA_DIR / "bmb_core_pantelides.json"))
            ),
            results_db_name=_get_env("DONOR_STARK_RESULTS_DB", "results.sqlite"),
        )
        runtime_settings = RuntimeSettings(
            log_level=_get_env("LOG_LEVEL", "INFO"),
            workers=max(1, _get_int("DONOR_STARK_WORKERS", 1)),
            dense_cap=_get_int("DONOR_STARK_DENSE_CAP", 5000),
        )
        physics_defaults = PhysicsDefaults(
            lattice_constant_nm=_get_float("DONOR_STARK_LATTICE_CONSTANT_NM", 0.5431),
            kappa=_get_float("DONOR_STARK_KAPPA", 11.9),
            u0_ev=_get_float("DONOR_STARK_U0_EV", 4.33),
            target_binding_ev=_get_float("DONOR_STARK_TARGET_BINDING_EV", 0.0456),
            passivation_shift_ev=_get_float("DONOR_STARK_PASSIVATION_SHIFT_EV", 30.0),
        )
        return cls(
            paths=path_settings,
            runtime=runtime_settings,
            physics=physics_defaults,
        )


settings = Settings.from_env()

__all__ = ["settings", "Settings", "PathSettings", "RuntimeSettings", "PhysicsDefaults", "ROOT_DIR", "DATA_DIR"]
