from __future__ import annotations

from typing import Callable, Dict, List

from sqlalchemy import JSON, Column, DateTime, Float, Integer, MetaData, String, Table, UniqueConstraint, func

metadata = MetaData()
_table_cache: Dict[str, Table] = {}

POINTS_TABLE = "sweep_points"
RUNS_TABLE = "sweep_runs"


def _point_columns() -> List[object]:
    return [
        Column("id", Integer, primary_key=True),
        Column("run_hash", String(64), nullable=False),
        Column("depth_nm", Float, nullable=False),
        Column("field_v_per_um", Float, nullable=False),
        Column("ratio_all", Float, nullable=False),
        Column("ratio_s", Float, nullable=False),
        Column("dipole_nm", Float, nullable=False),
        Column("ground_energy_ev", Float, nullable=False),
        Column("iterations", Integer, nullable=False),
        Column("payload", JSON),
        Column("computed_at", DateTime(timezone=True), server_default=func.now()),
        UniqueConstraint("run_hash", "depth_nm", "field_v_per_um", name="uq_sweep_point"),
    ]


def _run_columns() -> List[object]:
    return [
        Column("id", Integer, primary_key=True),
        Column("run_hash", String(64), nullable=False),
        Column("depth_nm", Float, nullable=False),
        Column("status", String(16), nullable=False),
        Column("detail", JSON),
        Column("updated_at", DateTime(timezone=True), server_default=func.now(), onupdate=func.now()),
        UniqueConstraint("run_hash", "depth_nm", name="uq_sweep_run"),
    ]


_COLUMNS: Dict[str, Callable[[], List[object]]] = {POINTS_TABLE: _point_columns, RUNS_TABLE: _run_columns}


def get_table(table_name: str = POINTS_TABLE) -> Table:
    """
    Lazily create and cache a Table definition.
    """
    if table_name not in _COLUMNS:
        raise KeyError(f"unknown ledger table {table_name}")
    if table_name not in _table_cache:
        _table_cache[table_name] = Table(table_name, metadata, *_COLUMNS[table_name](), extend_existing=True)
    return _table_cache[table_name]


# Both tables belong to the metadata before any engine creates the schema.
get_table(POINTS_TABLE)
get_table(RUNS_TABLE)

__all__ = ["POINTS_TABLE", "RUNS_TABLE", "get_table", "metadata"]
