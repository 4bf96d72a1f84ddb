from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, Union

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session, sessionmaker

from src.db.models import metadata

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_engines: Dict[str, Engine] = {}
_lock = threading.Lock()


def _build_engine(db_path: Path) -> Engine:
    db_path.parent.mkdir(parents=True, exist_ok=True)
    return create_engine(
        f"sqlite:///{db_path}",
        future=True,
        connect_args={"check_same_thread": False},
    )


def get_engine(db_path: PathLike) -> Engine:
    """One cached engine per ledger file; the schema is created on first use."""
    key = str(Path(db_path).resolve())
    with _lock:
        engine = _engines.get(key)
        if engine is None:
            engine = _build_engine(Path(key))
            metadata.create_all(engine)
            _engines[key] = engine
            logger.debug("Opened results ledger %s", key)
    return engine


def dispose_engines() -> None:
    with _lock:
        for engine in _engines.values():
            engine.dispose()
        _engines.clear()


@contextmanager
def session_scope(db_path: PathLike) -> Iterator[Session]:
    """Provide a transactional scope for ledger work."""
    session: Session = sessionmaker(bind=get_engine(db_path), autoflush=False, future=True)()
    try:
        yield session
        session.commit()
    except SQLAlchemyError:
        session.rollback()
        logger.exception("Database error, rolled back session")
        raise
    finally:
        session.close()


__all__ = ["dispose_engines", "get_engine", "session_scope"]
