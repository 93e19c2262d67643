"""
Database connection and session management.
"""

import os
from contextlib import contextmanager
from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.orm import scoped_session, sessionmaker

from app.db.models import Base


def get_database_url() -> str:
    """Get database URL from environment or use default."""
    return os.getenv("FEDSSC_DATABASE_URL", "sqlite:///runs/fedssc.db")


def ensure_data_directory(db_url: str) -> None:
    """Ensure the directory of a SQLite database file exists."""
    if db_url.startswith("sqlite:///") and db_url != "sqlite:///:memory:":
        db_dir = os.path.dirname(db_url.replace("sqlite:///", ""))
        if db_dir:
            os.makedirs(db_dir, exist_ok=True)


engine = None
SessionLocal = None
_current_url: Optional[str] = None


def init_db(db_url: Optional[str] = None):
    """
    Initialize the database engine and create tables.

    Calling again with another URL disposes the previous engine.
    """
    global engine, SessionLocal, _current_url

    db_url = db_url or get_database_url()
    if engine is not None and db_url == _current_url:
        return engine
    close_db()

    ensure_data_directory(db_url)
    engine = create_engine(
        db_url,
        connect_args={"check_same_thread": False} if db_url.startswith("sqlite") else {},
        echo=False
    )
    SessionLocal = scoped_session(
        sessionmaker(autocommit=False, autoflush=False, bind=engine, expire_on_commit=False)
    )
    Base.metadata.create_all(bind=engine)
    _current_url = db_url
    return engine


def get_session():
    """Get a database session."""
    if SessionLocal is None:
        init_db()
    return SessionLocal()


@contextmanager
def get_db_session():
    """Context manager for database sessions."""
    session = get_session()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def close_db():
    """Close the database connection."""
    global engine, SessionLocal, _current_url
    if SessionLocal:
        SessionLocal.remove()
    if engine:
        engine.dispose()
    engine = None
    SessionLocal = None
    _current_url = None
