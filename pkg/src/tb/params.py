from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

from src.errors import ChecksumError, SchemaError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ORBITAL_SHELLS: Dict[str, str] = {
    "s": "s",
    "px": "p",
    "py": "p",
    "pz": "p",
    "dyz": "d",
    "dzx": "d",
    "dxy": "d",
    "dx2-y2": "d",
    "dz2": "d",
    "s*": "s*",
}
CANONICAL_ORDER: Tuple[str, ...] = tuple(ORBITAL_SHELLS)

# Integrals needed for every unordered pair of shells present in the orbital set.
SHELL_PAIR_INTEGRALS: Dict[Tuple[str, str], Tuple[str, ...]] = {
    ("s", "s"): ("ssσ",),
    ("s", "p"): ("spσ",),
    ("p", "p"): ("ppσ", "ppπ"),
    ("s", "d"): ("sdσ",),
    ("p", "d"): ("pdσ", "pdπ"),
    ("d", "d"): ("ddσ", "ddπ", "ddδ"),
    ("s*", "s*"): ("s*s*σ",),
    ("s", "s*"): ("ss*σ",),
    ("s*", "p"): ("s*pσ",),
    ("s*", "d"): ("s*dσ",),
}
SPIN_ORBIT_SHELLS = ("p",)
REQUIRED_KEYS = ("schema_version", "orbitals", "onsite", "sk_integrals", "spin_orbit", "provenance")
OPTIONAL_KEYS = ("published_targets", "checksum")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TbParameterSet:
    orbital_set: Tuple[str, ...]
    onsite_energies: Tuple[float, ...]
    sk_integrals: Mapping[str, float]
    spin_orbit: Mapping[str, float]
    provenance: str
    checksum: str
    published_targets: Mapping[str, float]

    @property
    def n_orbitals(self) -> int:
        return len(self.orbital_set)

    @property
    def n_basis(self) -> int:
        """Basis functions per atom (orbitals x spin)."""
        return 2 * self.n_orbitals

    @property
    def shells(self) -> Tuple[str, ...]:
        seen: List[str] = []
        for label in self.orbital_set:
            shell = ORBITAL_SHELLS[label]
            if shell not in seen:
                seen.append(shell)
        return tuple(seen)

    def orbital_index(self, label: str) -> int:
        return self.orbital_set.index(label)

    def s_like_indices(self) -> List[int]:
        return [i for i, label in enumerate(self.orbital_set) if ORBITAL_SHELLS[label] in ("s", "s*")]

    def integral(self, name: str) -> float:
        return float(self.sk_integrals.get(name, 0.0))

    def with_integrals(self, **overrides: float) -> "TbParameterSet":
        """Copy with some integrals replaced (keys may use Greek names, e.g. ``**{'ppπ': 0.0}``)."""
        integrals = dict(self.sk_integrals)
        integrals.update({key: float(value) for key, value in overrides.items()})
        document = self.to_document()
        document["sk_integrals"] = integrals
        document.pop("checksum", None)
        return load_params(document)

    def shifted(self, offset: float) -> "TbParameterSet":
        document = self.to_document()
        document["onsite"] = {label: value + offset for label, value in document["onsite"].items()}
        document.pop("checksum", None)
        return load_params(document)

    def to_document(self) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "orbitals": list(self.orbital_set),
            "onsite": {label: value for label, value in zip(self.orbital_set, self.onsite_energies)},
            "sk_integrals": dict(self.sk_integrals),
            "spin_orbit": dict(self.spin_orbit),
            "provenance": self.provenance,
        }
        if self.published_targets:
            document["published_targets"] = dict(self.published_targets)
        document["checksum"] = self.checksum
        return document


def compute_checksum(document: Mapping[str, Any]) -> str:
    content = {key: value for key, value in document.items() if key != "checksum"}
    canonical = json.dumps(content, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_params(document: Union[Mapping[str, Any], str, bytes]) -> TbParameterSet:
    """Validate a parameter document (mapping or JSON text) into a TbParameterSet."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"parameter document is not valid JSON: {exc}", field="<document>") from exc
    if not isinstance(document, Mapping):
        raise SchemaError("parameter document must be a JSON object", field="<document>")

    for key in REQUIRED_KEYS:
        if key not in document:
            raise SchemaError(f"missing {key}", field=key)
    unknown = sorted(set(document) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise SchemaError(f"unknown key {unknown[0]}", field=unknown[0])
    if document["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {document['schema_version']!r}", field="schema_version"
        )

    orbitals = document["orbitals"]
    if not isinstance(orbitals, list) or not orbitals:
        raise SchemaError("orbitals must be a non-empty list", field="orbitals")
    for label in orbitals:
        if label not in ORBITAL_SHELLS:
            raise SchemaError(f"unknown orbital label {label}", field=f"orbitals.{label}")
    if len(set(orbitals)) != len(orbitals):
        raise SchemaError("orbital labels must be unique", field="orbitals")
    orbital_set = tuple(label for label in CANONICAL_ORDER if label in orbitals)

    onsite_doc = _require_mapping(document, "onsite")
    onsite: List[float] = []
    for label in orbital_set:
        if label not in onsite_doc:
            raise SchemaError(f"missing onsite energy {label}", field=f"onsite.{label}")
        onsite.append(_finite(onsite_doc[label], f"onsite.{label}"))
    for label in onsite_doc:
        if label not in orbital_set:
            raise SchemaError(f"unknown orbital label {label}", field=f"onsite.{label}")

    shells = {ORBITAL_SHELLS[label] for label in orbital_set}
    integrals_doc = _require_mapping(document, "sk_integrals")
    integrals: Dict[str, float] = {}
    for (first, second), names in SHELL_PAIR_INTEGRALS.items():
        if first in shells and second in shells:
            for name in names:
                if name not in integrals_doc:
                    raise SchemaError(f"missing sk_integral {name}", field=f"sk_integrals.{name}")
                integrals[name] = _finite(integrals_doc[name], f"sk_integrals.{name}")
    known_integrals = {name for names in SHELL_PAIR_INTEGRALS.values() for name in names}
    for name in integrals_doc:
        if name not in known_integrals:
            raise SchemaError(f"unknown sk_integral {name}", field=f"sk_integrals.{name}")

    spin_doc = _require_mapping(document, "spin_orbit")
    spin_orbit: Dict[str, float] = {}
    for shell, value in spin_doc.items():
        if shell not in SPIN_ORBIT_SHELLS:
            raise SchemaError(f"unknown spin_orbit shell {shell}", field=f"spin_orbit.{shell}")
        spin_orbit[shell] = _finite(value, f"spin_orbit.{shell}")

    provenance = document["provenance"]
    if not isinstance(provenance, str) or not provenance.strip():
        raise SchemaError("provenance must be a non-empty string", field="provenance")

    targets_doc = document.get("published_targets") or {}
    if not isinstance(targets_doc, Mapping):
        raise SchemaError("published_targets must be an object", field="published_targets")
    targets = {key: _finite(value, f"published_targets.{key}") for key, value in targets_doc.items()}

    checksum = compute_checksum(document)
    declared = document.get("checksum")
    if declared is not None and declared != checksum:
        raise ChecksumError(
            "parameter checksum does not match file content",
            field="checksum",
            details={"declared": declared, "computed": checksum},
        )

    params = TbParameterSet(
        orbital_set=orbital_set,
        onsite_energies=tuple(onsite),
        sk_integrals=integrals,
        spin_orbit=spin_orbit,
        provenance=provenance,
        checksum=checksum,
        published_targets=targets,
    )
    logger.debug("Loaded %d-orbital parameter set (%s)", params.n_orbitals, checksum[:12])
    return params


def load_params_file(path: PathLike) -> TbParameterSet:
    file_path = Path(path)
    if not file_path.exists():
        raise SchemaError(f"parameter file {file_path} does not exist", field="params_file")
    logger.info("Loading tight-binding parameters from %s", file_path)
    return load_params(file_path.read_text(encoding="utf-8"))


def save_params(params: TbParameterSet, path: PathLike) -> Path:
    document = params.to_document()
    document["checksum"] = compute_checksum(document)
    file_path = Path(path)
    file_path.write_text(json.dumps(document, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return file_path


def _require_mapping(document: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = document[key]
    if not isinstance(value, Mapping):
        raise SchemaError(f"{key} must be an object", field=key)
    return value


def _finite(value: Any, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"non-numeric entry for {field_name}", field=field_name)
    number = float(value)
    if not math.isfinite(number):
        raise SchemaError(f"non-finite entry for {field_name}", field=field_name)
    return number


def describe(params: TbParameterSet) -> str:
    return f"{'/'.join(params.shells)} ({params.n_basis} basis functions per atom): {params.provenance}"


__all__ = [
    "CANONICAL_ORDER",
    "ORBITAL_SHELLS",
    "TbParameterSet",
    "compute_checksum",
    "describe",
    "load_params",
    "load_params_file",
    "save_params",
]
