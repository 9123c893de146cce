"""SQLAlchemy ORM models for the results ledger."""

from datetime import datetime

from sqlalchemy import JSON, Column, DateTime, Float, Integer, String, Text, UniqueConstraint

from backend.database import Base


class ResultRecord(Base):
    """One row per (experiment id, seed, quantity)."""
    __tablename__ = "results"
    __table_args__ = (UniqueConstraint("experiment_id", "seed", "quantity", name="uq_result"),)

    id = Column(Integer, primary_key=True, autoincrement=True)
    experiment_id = Column(String, nullable=False, index=True)
    command = Column(String, nullable=False)
    seed = Column(Integer, nullable=True)
    quantity = Column(String, nullable=False)

    # Bounded estimates
    estimate = Column(Float, nullable=True)
    band_lower = Column(Float, nullable=True)
    band_upper = Column(Float, nullable=True)
    replications = Column(Integer, nullable=True)
    failures = Column(Integer, nullable=True)

    # Exact values and verdicts ("num/den" or enum text)
    value = Column(Text, nullable=True)

    payload_sha256 = Column(String(64), nullable=False)
    payload = Column(JSON, nullable=True)
    wall_clock = Column(Float, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)
