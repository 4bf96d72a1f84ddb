from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.observables.density import DensityMap

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.12e"

SWEEP_COLUMNS = ["depth", "field_V_per_um", "dA_over_A0", "dipole_nm"]
FIGURE_COLUMNS = {
    "fig1a": ["depth", "field", "dA_over_A0"],
    "fig1b": ["depth", "eta2", "eta1", "eta2_sigma", "eta1_sigma"],
    "fig1c": ["depth", "field", "dipole_nm"],
    "fig1d": ["depth", "dipole_slope", "dipole_intercept"],
}


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _clean(value: Any) -> Any:
    """NaN and infinities become null so every document is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    return value


def write_json(path: PathLike, document: Mapping[str, Any]) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(dict(document)), indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    file_path.write_text(text + "\n", encoding="utf-8")
    return file_path


def read_json(path: PathLike) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path: PathLike, frame: pd.DataFrame, config_hash: str, sort_by: Optional[Sequence[str]] = None) -> Path:
    """CSV with a ``# config_hash=`` first line; rows sorted, floats in a fixed format."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    if sort_by:
        frame = frame.sort_values(list(sort_by), kind="mergesort").reset_index(drop=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# config_hash={config_hash}\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("Wrote %d rows to %s", len(frame), file_path)
    return file_path


def read_csv(path: PathLike) -> Tuple[str, pd.DataFrame]:
    """(config hash, frame) of a file written by ``write_csv``."""
    file_path = Path(path)
    with file_path.open("r", encoding="utf-8") as handle:
        first = handle.readline().strip()
    config_hash = first.split("=", 1)[1] if first.startswith("# config_hash=") else ""
    return config_hash, pd.read_csv(file_path, comment="#")


def sweep_frame(entries: Iterable[Mapping[str, Any]]) -> pd.DataFrame:
    """Flat (depth, field, dA/A0, dipole) rows from sweep documents."""
    rows: List[Dict[str, float]] = []
    for sweep in entries:
        for point in sweep.get("points", []):
            rows.append(
                {
                    "depth": float(sweep["depth_nm"]),
                    "field_V_per_um": float(point["field_V_per_um"]),
                    "dA_over_A0": float(point["ratio_all"]) - 1.0,
                    "dipole_nm": float(point["dipole_nm"]),
                }
            )
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def write_sweep(
    out_dir: PathLike,
    document: Mapping[str, Any],
    config_hash: str,
    *,
    name: str = "sweep",
) -> Tuple[Path, Path]:
    """``document`` holds ``sweep`` plus its fits; writes ``<name>.json`` and ``<name>.csv``."""
    directory = Path(out_dir)
    json_path = write_json(directory / f"{name}.json", {"config_hash": config_hash, **document})
    sweeps = document.get("sweeps") or [document["sweep"]]
    csv_path = write_csv(directory / f"{name}.csv", sweep_frame(sweeps), config_hash, SWEEP_COLUMNS[:2])
    return json_path, csv_path


def figure_frames(scan: Mapping[str, Any]) -> Dict[str, pd.DataFrame]:
    """Per-panel tables from a depth-scan document (entries with sweep, stark_fit, dipole_fit)."""
    rows: Dict[str, List[Dict[str, Any]]] = {name: [] for name in FIGURE_COLUMNS}
    for entry in scan.get("entries", []):
        sweep = entry.get("sweep")
        if not sweep:
            continue
        depth = float(sweep["depth_nm"])
        for point in sweep.get("points", []):
            rows["fig1a"].append(
                {"depth": depth, "field": float(point["field_V_per_um"]), "dA_over_A0": float(point["ratio_all"]) - 1.0}
            )
            rows["fig1c"].append({"depth": depth, "field": float(point["field_V_per_um"]), "dipole_nm": float(point["dipole_nm"])})
        fit = entry.get("stark_fit")
        if fit:
            rows["fig1b"].append(
                {
                    "depth": depth,
                    "eta2": fit["eta2_um2_per_V2"],
                    "eta1": fit["eta1_um_per_V"],
                    "eta2_sigma": fit["eta2_sigma"],
                    "eta1_sigma": fit["eta1_sigma"],
                }
            )
        dipole = entry.get("dipole_fit")
        if dipole:
            rows["fig1d"].append(
                {"depth": depth, "dipole_slope": dipole["slope_nm_per_V_per_um"], "dipole_intercept": dipole["intercept_nm"]}
            )
    return {name: pd.DataFrame(rows[name], columns=columns) for name, columns in FIGURE_COLUMNS.items()}


def write_figure_csvs(out_dir: PathLike, scan: Mapping[str, Any], config_hash: str) -> List[Path]:
    directory = Path(out_dir)
    paths = []
    for name, frame in figure_frames(scan).items():
        keys = FIGURE_COLUMNS[name][:2] if name in ("fig1a", "fig1c") else ["depth"]
        paths.append(write_csv(directory / f"{name}.csv", frame, config_hash, keys))
    return paths


def write_density_map(
    out_dir: PathLike,
    name: str,
    density: DensityMap,
    meta: Mapping[str, Any],
    config_hash: str,
) -> Tuple[Path, Path]:
    directory = Path(out_dir)
    frame = pd.DataFrame(
        {
            "x_nm": density.positions[:, 0],
            "y_nm": density.positions[:, 1],
            "z_nm": density.positions[:, 2],
            "value": density.values,
        }
    )
    csv_path = write_csv(directory / f"{name}.csv", frame, config_hash, ["x_nm", "y_nm", "z_nm"])
    sidecar = {"config_hash": config_hash, **density.to_document(), **dict(meta)}
    json_path = write_json(directory / f"{name}.json", sidecar)
    return csv_path, json_path


def write_bands(out_dir: PathLike, k_path: np.ndarray, bands: np.ndarray, summary: Mapping[str, Any], config_hash: str) -> Tuple[Path, Path]:
    directory = Path(out_dir)
    columns: Dict[str, Any] = {"k_index": np.arange(k_path.shape[0]), "kx": k_path[:, 0], "ky": k_path[:, 1], "kz": k_path[:, 2]}
    for band in range(bands.shape[1]):
        columns[f"band_{band:02d}"] = bands[:, band]
    csv_path = write_csv(directory / "bands.csv", pd.DataFrame(columns), config_hash, ["k_index"])
    json_path = write_json(directory / "bands.json", {"config_hash": config_hash, **dict(summary)})
    return csv_path, json_path


def write_table(out_dir: PathLike, name: str, frame: pd.DataFrame, config_hash: str, sort_by: Optional[Sequence[str]] = None) -> Path:
    return write_csv(Path(out_dir) / f"{name}.csv", frame, config_hash, sort_by)


__all__ = [
    "FIGURE_COLUMNS",
    "FLOAT_FORMAT",
    "SWEEP_COLUMNS",
    "figure_frames",
    "read_csv",
    "read_json",
    "sweep_frame",
    "write_bands",
    "write_csv",
    "write_density_map",
    "write_figure_csvs",
    "write_json",
    "write_sweep",
    "write_table",
]
