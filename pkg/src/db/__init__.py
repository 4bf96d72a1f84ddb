"""Results ledger (SQLite) for computed sweep points."""

from .engine import dispose_engines, get_engine, session_scope
from .repository import fetch_points, fetch_status, mark_complete, mark_incomplete, upsert_points

__all__ = [
    "dispose_engines",
    "fetch_points",
    "fetch_status",
    "get_engine",
    "mark_complete",
    "mark_incomplete",
    "session_scope",
    "upsert_points",
]
