"""Database configuration and session management for the results ledger."""

import os
from typing import Dict, Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from src.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_URL = "sqlite:///./results.db"

# Base class for declarative models
Base = declarative_base()

_engines: Dict[str, Engine] = {}


def resolve_url(url: Optional[str] = None) -> str:
    """Explicit URL, else BKSIM_RESULTS_DB, else the local SQLite file."""
    url = url or os.getenv("BKSIM_RESULTS_DB") or DEFAULT_URL
    if "://" not in url:
        # A bare path means a SQLite file
        url = f"sqlite:///{url}"
    # Some platforms hand out "postgres://" instead of "postgresql://"
    if url.startswith("postgres://"):
        url = url.replace("postgres://", "postgresql://", 1)
    return url


def get_engine(url: Optional[str] = None) -> Engine:
    """One engine per URL, created on first use with the tables in place."""
    url = resolve_url(url)
    if url not in _engines:
        connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
        engine = create_engine(url, connect_args=connect_args)
        init_db(engine)
        _engines[url] = engine
        logger.debug(f"Results ledger at {url}")
    return _engines[url]


def session_factory(url: Optional[str] = None) -> sessionmaker:
    return sessionmaker(autocommit=False, autoflush=False, bind=get_engine(url))


def get_db(url: Optional[str] = None) -> Iterator[Session]:
    """
    Yield a session and close it afterwards.

    Usage:
        db = next(get_db())
        try:
            ...
        finally:
            db.close()
    """
    db = session_factory(url)()
    try:
        yield db
    finally:
        db.close()


def init_db(engine: Engine) -> None:
    """Create the ledger tables."""
    from backend.database_models import ResultRecord  # noqa: F401 - registers the table
    Base.metadata.create_all(bind=engine)
