from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from src.config.settings import settings
from src.errors import ConfigError, DonorStarkError
from src.lattice.domain import AXES, DomainSpec
from src.potentials.calibration import CBM_REFERENCES
from src.potentials.donor import DEFAULT_FIELD_DIRECTION
from src.solver.lanczos import MODES, STARTS, SolverConfig
from src.tb.params import TbParameterSet, load_params_file

logger = logging.getLogger(__name__)

# Canonical units: nm, eV, V/um.
LENGTH_UNITS = {"nm": 1.0, "A": 0.1, "angstrom": 0.1, "um": 1e3, "pm": 1e-3}
ENERGY_UNITS = {"eV": 1.0, "meV": 1e-3, "ueV": 1e-6}
FIELD_UNITS = {"V/um": 1.0, "MV/m": 1.0, "kV/cm": 0.1, "V/m": 1e-6, "kV/um": 1e3}

DEFAULT_FIELDS = tuple(round(-1.0 + 0.25 * i, 12) for i in range(9))
QUICK_FIELDS = (-1.0, -0.5, 0.0, 0.5, 1.0)
QUICK_EXTENT_NM = 8.0
DEFAULT_DEPTH_RANGE = (5.0, 32.0)

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s]+)\s*$")
_BARE_NUMBER = re.compile(r"^\s*[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?\s*$")

TOP_KEYS = (
    "domain",
    "params_file",
    "core_params_file",
    "potential",
    "hamiltonian",
    "field",
    "depths_nm",
    "depth_range_nm",
    "solver",
    "output_dir",
    "workers",
)
DOMAIN_KEYS = ("extents_nm", "impurity_depth_nm", "lattice_constant_nm", "depth_axis")
POTENTIAL_KEYS = (
    "kappa",
    "u0_ev",
    "target_binding_ev",
    "cbm_reference",
    "bracket_ev",
    "calibration_tolerance_ev",
    "calibration_max_iterations",
)
HAMILTONIAN_KEYS = ("spin_orbit", "passivation_shift_ev")
FIELD_KEYS = ("grid_V_per_um", "direction", "dipole_axis", "ionization_guard")
SOLVER_KEYS = (
    "n_states",
    "tolerance",
    "max_iterations",
    "seed",
    "sigma",
    "sigma_offset",
    "mode",
    "start",
    "block_size",
    "max_basis",
    "window_halfwidth",
    "check_interval",
    "gaussian_width",
)
SOLVER_ENERGY_KEYS = ("tolerance", "sigma", "sigma_offset", "window_halfwidth")


@dataclass(frozen=True)
class PotentialConfig:
    """``u0`` None means calibrate against ``target_binding`` before solving."""

    kappa: float = 11.9
    u0: Optional[float] = None
    target_binding: float = 0.0456
    cbm_reference: str = "bulk"
    bracket: Tuple[float, float] = (0.0, 20.0)
    calibration_tolerance: float = 5e-5
    calibration_max_iterations: int = 30

    def to_document(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa,
            "u0_ev": self.u0,
            "target_binding_ev": self.target_binding,
            "cbm_reference": self.cbm_reference,
            "bracket_ev": list(self.bracket),
            "calibration_tolerance_ev": self.calibration_tolerance,
            "calibration_max_iterations": self.calibration_max_iterations,
        }


@dataclass(frozen=True)
class HamiltonianConfig:
    spin_orbit: bool = True
    passivation_shift: float = 30.0

    def to_document(self) -> Dict[str, Any]:
        return {"spin_orbit": self.spin_orbit, "passivation_shift_ev": self.passivation_shift}


@dataclass(frozen=True)
class FieldConfig:
    grid: Tuple[float, ...] = DEFAULT_FIELDS
    direction: Tuple[float, float, float] = DEFAULT_FIELD_DIRECTION
    dipole_axis: str = "y"
    ionization_guard: float = 0.2

    def to_document(self) -> Dict[str, Any]:
        return {
            "grid_V_per_um": list(self.grid),
            "direction": list(self.direction),
            "dipole_axis": self.dipole_axis,
            "ionization_guard": self.ionization_guard,
        }


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    params_file: Path
    core_params_file: Optional[Path] = None
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    hamiltonian: HamiltonianConfig = field(default_factory=HamiltonianConfig)
    efield: FieldConfig = field(default_factory=FieldConfig)
    depths: Tuple[float, ...] = ()
    depth_range: Tuple[float, float] = DEFAULT_DEPTH_RANGE
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: Path = Path("out")
    workers: int = 1

    def to_document(self) -> Dict[str, Any]:
        solver_doc = self.solver.to_document()
        solver_doc.pop("workers", None)
        return {
            "domain": {
                "extents_nm": list(self.domain.extents),
                "impurity_depth_nm": self.domain.impurity_depth,
                "lattice_constant_nm": self.domain.lattice_constant,
                "depth_axis": self.domain.depth_axis,
            },
            "params_file": str(self.params_file),
            "core_params_file": None if self.core_params_file is None else str(self.core_params_file),
            "potential": self.potential.to_document(),
            "hamiltonian": self.hamiltonian.to_document(),
            "field": self.efield.to_document(),
            "depths_nm": list(self.depths),
            "depth_range_nm": list(self.depth_range),
            "solver": solver_doc,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
        }

    @property
    def physics_document(self) -> Dict[str, Any]:
        """Everything that changes numbers; output location and worker count are excluded."""
        document = self.to_document()
        document.pop("output_dir")
        document.pop("workers")
        return document

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.physics_document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def load_params(self) -> TbParameterSet:
        return load_params_file(self.params_file)

    def solver_config(self) -> SolverConfig:
        return self.solver.replace(workers=self.workers)

    def with_overrides(
        self,
        *,
        output_dir: Optional[Union[str, Path]] = None,
        workers: Optional[int] = None,
        seed: Optional[int] = None,
        fields: Optional[Sequence[float]] = None,
        depths: Optional[Sequence[float]] = None,
    ) -> "RunConfig":
        config = self
        if output_dir is not None:
            config = replace(config, output_dir=Path(output_dir))
        if workers is not None:
            if workers < 1:
                raise ConfigError("workers must be at least 1", field="workers", details={"workers": workers})
            config = replace(config, workers=int(workers))
        if seed is not None:
            config = replace(config, solver=config.solver.replace(seed=int(seed)))
        if fields is not None:
            config = replace(config, efield=replace(config.efield, grid=_field_grid(list(fields), "field.grid_V_per_um")))
        if depths is not None:
            config = replace(config, depths=_depths(list(depths), config.depth_range, "depths_nm"))
        return config

    def quick(self) -> "RunConfig":
        """Shrink to a small cube with depths scaled to it and a short field grid."""
        axis = self.domain.axis_index
        scale = QUICK_EXTENT_NM / self.domain.extents[axis]
        domain = DomainSpec(
            extents=(QUICK_EXTENT_NM,) * 3,
            impurity_depth=self.domain.impurity_depth * scale,
            lattice_constant=self.domain.lattice_constant,
            depth_axis=self.domain.depth_axis,
        )
        depths = tuple(depth * scale for depth in self.depths)
        low = min((self.depth_range[0] * scale,) + depths) if depths else self.depth_range[0] * scale
        high = max((self.depth_range[1] * scale,) + depths) if depths else self.depth_range[1] * scale
        return replace(
            self,
            domain=domain,
            depths=depths,
            depth_range=(low, high),
            efield=replace(self.efield, grid=QUICK_FIELDS),
        )

    def domain_at(self, depth: float) -> DomainSpec:
        return replace(self.domain, impurity_depth=float(depth))


def parse_quantity(value: Any, units: Mapping[str, float], field_name: str) -> float:
    """A bare number (canonical unit) or a '<number> <unit>' string."""
    if isinstance(value, bool):
        raise ConfigError(f"{field_name} must be a number", field=field_name)
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str) and _BARE_NUMBER.match(value):
        number = float(value)
    elif isinstance(value, str):
        match = _QUANTITY.match(value)
        if match is None:
            raise ConfigError(f"{field_name} is not a quantity: {value!r}", field=field_name)
        unit = match.group(2)
        if unit not in units:
            raise ConfigError(
                f"unknown unit {unit!r} for {field_name}",
                field=field_name,
                details={"unit": unit, "allowed": sorted(units)},
            )
        number = float(match.group(1)) * units[unit]
    else:
        raise ConfigError(f"{field_name} must be a number or a quantity string", field=field_name)
    if not math.isfinite(number):
        raise ConfigError(f"{field_name} must be finite", field=field_name)
    return number


def _number(value: Any, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{field_name} must be a finite number", field=field_name)
    return float(value)


def _section(document: Mapping[str, Any], key: str, allowed: Sequence[str], prefix: str = "") -> Mapping[str, Any]:
    name = f"{prefix}{key}"
    value = document.get(key, {})
    if value is None:
        value = {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{name} must be an object", field=name)
    _reject_unknown(value, allowed, f"{name}.")
    return value


def _reject_unknown(document: Mapping[str, Any], allowed: Sequence[str], prefix: str = "") -> None:
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {prefix}{unknown[0]}", field=f"{prefix}{unknown[0]}")


def _integer(value: Any, field_name: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{field_name} must be an integer", field=field_name)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{field_name} must be at least {minimum}", field=field_name)
    return int(value)


def _path(value: Any, field_name: str, base_dir: Optional[Path]) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{field_name} must be a path string", field=field_name)
    path = Path(value)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"{field_name} does not exist: {path}", field=field_name)
    return path


def _field_grid(values: Any, field_name: str) -> Tuple[float, ...]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{field_name} must be a non-empty list", field=field_name)
    grid = sorted(parse_quantity(v, FIELD_UNITS, f"{field_name}[{i}]") for i, v in enumerate(values))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{field_name} must not repeat values", field=field_name)
    if 0.0 not in grid:
        raise ConfigError(f"{field_name} must include zero field", field=field_name)
    return tuple(grid)


def _depths(values: Any, depth_range: Tuple[float, float], field_name: str) -> Tuple[float, ...]:
    if not isinstance(values, list):
        raise ConfigError(f"{field_name} must be a list", field=field_name)
    depths = sorted(parse_quantity(v, LENGTH_UNITS, f"{field_name}[{i}]") for i, v in enumerate(values))
    low, high = depth_range
    for depth in depths:
        if not low <= depth <= high:
            raise ConfigError(
                f"depth {depth} nm is outside the configured depth range",
                field=field_name,
                details={"depth_nm": depth, "range_nm": [low, high]},
            )
    return tuple(depths)


def _parse_domain(document: Mapping[str, Any]) -> DomainSpec:
    if "domain" not in document:
        raise ConfigError("missing domain", field="domain")
    section = _section(document, "domain", DOMAIN_KEYS)
    extents = section.get("extents_nm")
    if not isinstance(extents, list) or len(extents) != 3:
        raise ConfigError("domain.extents_nm must list three lengths", field="domain.extents_nm")
    if "impurity_depth_nm" not in section:
        raise ConfigError("missing domain.impurity_depth_nm", field="domain.impurity_depth_nm")
    axis = section.get("depth_axis", "y")
    if axis not in AXES:
        raise ConfigError("domain.depth_axis must be x, y or z", field="domain.depth_axis")
    try:
        return DomainSpec(
            extents=tuple(  # type: ignore[arg-type]
                parse_quantity(v, LENGTH_UNITS, f"domain.extents_nm[{i}]") for i, v in enumerate(extents)
            ),
            impurity_depth=parse_quantity(section["impurity_depth_nm"], LENGTH_UNITS, "domain.impurity_depth_nm"),
            lattice_constant=parse_quantity(
                section.get("lattice_constant_nm", settings.physics.lattice_constant_nm),
                LENGTH_UNITS,
                "domain.lattice_constant_nm",
            ),
            depth_axis=axis,
        )
    except DonorStarkError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(exc.message, field="domain", details=exc.details) from exc


def _parse_potential(document: Mapping[str, Any]) -> PotentialConfig:
    section = _section(document, "potential", POTENTIAL_KEYS)
    physics = settings.physics
    u0_raw = section.get("u0_ev")
    reference = section.get("cbm_reference", "bulk")
    if reference not in CBM_REFERENCES:
        raise ConfigError("potential.cbm_reference must be 'bulk' or 'domain'", field="potential.cbm_reference")
    bracket_raw = section.get("bracket_ev", [0.0, 20.0])
    if not isinstance(bracket_raw, list) or len(bracket_raw) != 2:
        raise ConfigError("potential.bracket_ev must list two energies", field="potential.bracket_ev")
    bracket = tuple(parse_quantity(v, ENERGY_UNITS, f"potential.bracket_ev[{i}]") for i, v in enumerate(bracket_raw))
    if not bracket[0] < bracket[1]:
        raise ConfigError("potential.bracket_ev must be increasing", field="potential.bracket_ev")
    kappa = _number(section.get("kappa", physics.kappa), "potential.kappa")
    if kappa <= 1.0:
        raise ConfigError("potential.kappa must exceed 1", field="potential.kappa")
    return PotentialConfig(
        kappa=kappa,
        u0=None if u0_raw is None else parse_quantity(u0_raw, ENERGY_UNITS, "potential.u0_ev"),
        target_binding=parse_quantity(
            section.get("target_binding_ev", physics.target_binding_ev), ENERGY_UNITS, "potential.target_binding_ev"
        ),
        cbm_reference=reference,
        bracket=bracket,  # type: ignore[arg-type]
        calibration_tolerance=parse_quantity(
            section.get("calibration_tolerance_ev", 5e-5), ENERGY_UNITS, "potential.calibration_tolerance_ev"
        ),
        calibration_max_iterations=_integer(
            section.get("calibration_max_iterations", 30), "potential.calibration_max_iterations", 1
        ),
    )


def _parse_hamiltonian(document: Mapping[str, Any]) -> HamiltonianConfig:
    section = _section(document, "hamiltonian", HAMILTONIAN_KEYS)
    spin_orbit = section.get("spin_orbit", True)
    if not isinstance(spin_orbit, bool):
        raise ConfigError("hamiltonian.spin_orbit must be a boolean", field="hamiltonian.spin_orbit")
    return HamiltonianConfig(
        spin_orbit=spin_orbit,
        passivation_shift=parse_quantity(
            section.get("passivation_shift_ev", settings.physics.passivation_shift_ev),
            ENERGY_UNITS,
            "hamiltonian.passivation_shift_ev",
        ),
    )


def _parse_field(document: Mapping[str, Any]) -> FieldConfig:
    section = _section(document, "field", FIELD_KEYS)
    grid = _field_grid(section["grid_V_per_um"], "field.grid_V_per_um") if "grid_V_per_um" in section else DEFAULT_FIELDS
    direction_raw = section.get("direction", list(DEFAULT_FIELD_DIRECTION))
    if not isinstance(direction_raw, list) or len(direction_raw) != 3:
        raise ConfigError("field.direction must list three components", field="field.direction")
    direction = tuple(_number(v, f"field.direction[{i}]") for i, v in enumerate(direction_raw))
    if abs(math.sqrt(sum(v * v for v in direction)) - 1.0) > 1e-12:
        raise ConfigError("field.direction must be a unit vector", field="field.direction")
    axis = section.get("dipole_axis", "y")
    if axis not in AXES:
        raise ConfigError("field.dipole_axis must be x, y or z", field="field.dipole_axis")
    guard = _number(section.get("ionization_guard", 0.2), "field.ionization_guard")
    if not 0.0 <= guard < 1.0:
        raise ConfigError("field.ionization_guard must lie in [0, 1)", field="field.ionization_guard")
    return FieldConfig(grid=grid, direction=direction, dipole_axis=axis, ionization_guard=guard)  # type: ignore[arg-type]


def _parse_solver(document: Mapping[str, Any]) -> SolverConfig:
    section = _section(document, "solver", SOLVER_KEYS)
    values: Dict[str, Any] = {}
    for key, raw in section.items():
        name = f"solver.{key}"
        if key in SOLVER_ENERGY_KEYS:
            values[key] = None if raw is None and key in ("sigma", "window_halfwidth") else parse_quantity(
                raw, ENERGY_UNITS, name
            )
        elif key in ("mode", "start"):
            allowed = MODES if key == "mode" else STARTS
            if raw not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}", field=name)
            values[key] = raw
        elif key == "gaussian_width":
            values[key] = parse_quantity(raw, LENGTH_UNITS, name)
        else:
            values[key] = _integer(raw, name, 0 if key == "seed" else 1)
    try:
        return SolverConfig(**values)
    except DonorStarkError as exc:
        raise ConfigError(exc.message, field="solver", details=exc.details) from exc


def parse_config(document: Union[Mapping[str, Any], str, bytes], *, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a run document; unknown keys are fatal and defaults are filled in."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", field="<document>") from exc
    if not isinstance(document, Mapping):
        raise ConfigError("config must be a JSON object", field="<document>")
    _reject_unknown(document, TOP_KEYS)

    domain = _parse_domain(document)
    override = settings.paths.params_override
    if override is not None:
        params_file = _path(str(override), "params_file", None)
    else:
        params_file = _path(document.get("params_file", str(settings.paths.params_file)), "params_file", base_dir)
    core_raw = document.get("core_params_file")
    core_file = None if core_raw is None else _path(core_raw, "core_params_file", base_dir)

    range_raw = document.get("depth_range_nm", list(DEFAULT_DEPTH_RANGE))
    if not isinstance(range_raw, list) or len(range_raw) != 2:
        raise ConfigError("depth_range_nm must list two lengths", field="depth_range_nm")
    depth_range = tuple(parse_quantity(v, LENGTH_UNITS, f"depth_range_nm[{i}]") for i, v in enumerate(range_raw))
    depths = _depths(document.get("depths_nm", []), depth_range, "depths_nm")  # type: ignore[arg-type]

    output_raw = document.get("output_dir", "out")
    if not isinstance(output_raw, str) or not output_raw:
        raise ConfigError("output_dir must be a path string", field="output_dir")

    config = RunConfig(
        domain=domain,
        params_file=params_file,
        core_params_file=core_file,
        potential=_parse_potential(document),
        hamiltonian=_parse_hamiltonian(document),
        efield=_parse_field(document),
        depths=depths,
        depth_range=depth_range,  # type: ignore[arg-type]
        solver=_parse_solver(document),
        output_dir=Path(output_raw),
        workers=_integer(document.get("workers", settings.runtime.workers), "workers", 1),
    )
    try:
        config.load_params()
    except DonorStarkError as exc:
        raise ConfigError(f"parameter file rejected: {exc.message}", field="params_file", details=exc.details) from exc
    logger.info("Run config parsed (hash %s)", config.config_hash[:12])
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(f"config file {file_path} does not exist", field="--config")
    return parse_config(file_path.read_text(encoding="utf-8"), base_dir=file_path.resolve().parent)


__all__ = [
    "DEFAULT_FIELDS",
    "QUICK_FIELDS",
    "ENERGY_UNITS",
    "FIELD_UNITS",
    "FieldConfig",
    "HamiltonianConfig",
    "LENGTH_UNITS",
    "PotentialConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "parse_quantity",
]
