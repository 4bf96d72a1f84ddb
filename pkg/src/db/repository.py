from __future__ import annotations

import logging
from typing import Any, Dict, Iterable, List, Mapping, Optional

from sqlalchemy import func, select
from sqlalchemy.dialects.sqlite import insert

from src.db.engine import PathLike, session_scope
from src.db.models import POINTS_TABLE, RUNS_TABLE, get_table

logger = logging.getLogger(__name__)

POINT_FIELDS = (
    "run_hash",
    "depth_nm",
    "field_v_per_um",
    "ratio_all",
    "ratio_s",
    "dipole_nm",
    "ground_energy_ev",
    "iterations",
)
COMPLETE = "complete"
INCOMPLETE = "incomplete"


def upsert_points(db_path: PathLike, rows: Iterable[Mapping[str, Any]]) -> int:
    """
    Insert new sweep points; rows whose (run_hash, depth, field) key exists are skipped.
    """
    table = get_table(POINTS_TABLE)
    payloads: List[Dict[str, Any]] = []
    for row in rows:
        missing = [name for name in POINT_FIELDS if row.get(name) is None]
        if missing:
            logger.warning("Skipping sweep point without %s", ", ".join(missing))
            continue
        mapped = {name: row[name] for name in POINT_FIELDS}
        mapped["payload"] = dict(row.get("payload") or {})
        payloads.append(mapped)
    if not payloads:
        return 0

    stmt = insert(table).values(payloads).on_conflict_do_nothing(
        index_elements=["run_hash", "depth_nm", "field_v_per_um"]
    )
    with session_scope(db_path) as session:
        result = session.execute(stmt)
        rowcount = result.rowcount if result is not None else 0
    logger.debug("Stored %d of %d sweep points in %s", rowcount, len(payloads), db_path)
    return rowcount


def fetch_points(db_path: PathLike, run_hash: str, depth_nm: Optional[float] = None) -> List[Dict[str, Any]]:
    """
    Stored points of a run, ordered by (depth, field).
    """
    table = get_table(POINTS_TABLE)
    stmt = select(table).where(table.c.run_hash == run_hash)
    if depth_nm is not None:
        stmt = stmt.where(table.c.depth_nm == float(depth_nm))
    stmt = stmt.order_by(table.c.depth_nm, table.c.field_v_per_um)
    with session_scope(db_path) as session:
        return [
            {**{name: row._mapping[name] for name in POINT_FIELDS}, "payload": row._mapping["payload"] or {}}
            for row in session.execute(stmt)
        ]


def _set_status(db_path: PathLike, run_hash: str, depth_nm: float, status: str, detail: Mapping[str, Any]) -> None:
    table = get_table(RUNS_TABLE)
    stmt = insert(table).values(run_hash=run_hash, depth_nm=float(depth_nm), status=status, detail=dict(detail))
    stmt = stmt.on_conflict_do_update(
        index_elements=["run_hash", "depth_nm"],
        set_={"status": status, "detail": dict(detail), "updated_at": func.now()},
    )
    with session_scope(db_path) as session:
        session.execute(stmt)


def mark_incomplete(db_path: PathLike, run_hash: str, depth_nm: float, detail: Optional[Mapping[str, Any]] = None) -> None:
    _set_status(db_path, run_hash, depth_nm, INCOMPLETE, detail or {})
    logger.warning("Sweep %s at depth %.4f nm marked incomplete", run_hash[:12], depth_nm)


def mark_complete(db_path: PathLike, run_hash: str, depth_nm: float, detail: Optional[Mapping[str, Any]] = None) -> None:
    _set_status(db_path, run_hash, depth_nm, COMPLETE, detail or {})


def fetch_status(db_path: PathLike, run_hash: str, depth_nm: float) -> Optional[str]:
    table = get_table(RUNS_TABLE)
    stmt = select(table.c.status).where(table.c.run_hash == run_hash, table.c.depth_nm == float(depth_nm))
    with session_scope(db_path) as session:
        return session.execute(stmt).scalar_one_or_none()


__all__ = [
    "COMPLETE",
    "INCOMPLETE",
    "fetch_points",
    "fetch_status",
    "mark_complete",
    "mark_incomplete",
    "upsert_points",
]
